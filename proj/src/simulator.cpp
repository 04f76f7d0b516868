#include "specvol/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "specvol/errors.hpp"

namespace specvol {

namespace {

constexpr double kSigmaSquaredFloor = 1e-6;

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& sigma) {
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

Eigen::MatrixXd interpolate_grid(const VolatilityModel& model, double t) {
  const auto& ts = model.grid_times;
  if (t <= ts.front()) return model.grid_values.front();
  if (t >= ts.back()) return model.grid_values.back();
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - ts.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - ts[lo]) / (ts[hi] - ts[lo]);
  return (1.0 - w) * model.grid_values[lo] + w * model.grid_values[hi];
}

}  // namespace

double SamplingScheme::quantile(double u) const {
  switch (kind) {
    case Kind::identity:
    case Kind::poisson:
      return u;
    case Kind::power:
      return std::pow(u, 1.0 / parameter);
    case Kind::sine:
      return u + parameter * std::sin(2.0 * std::numbers::pi * u) / (2.0 * std::numbers::pi);
  }
  return u;
}

double SamplingScheme::quantile_derivative(double u) const {
  switch (kind) {
    case Kind::identity:
    case Kind::poisson:
      return 1.0;
    case Kind::power:
      return std::pow(u, 1.0 / parameter - 1.0) / parameter;
    case Kind::sine:
      return 1.0 + parameter * std::cos(2.0 * std::numbers::pi * u);
  }
  return 1.0;
}

double SamplingScheme::cdf_derivative(double t) const {
  switch (kind) {
    case Kind::identity:
    case Kind::poisson:
      return 1.0;
    case Kind::power:
      return parameter * std::pow(t, parameter - 1.0);
    case Kind::sine: {
      // invert u + c sin(2 pi u)/(2 pi) = t by Newton; F'(t) = 1/(F^{-1})'(u)
      double u = t;
      for (int it = 0; it < 50; ++it) {
        const double g = quantile(u) - t;
        u -= g / quantile_derivative(u);
        if (std::abs(g) < 1e-15) break;
      }
      return 1.0 / quantile_derivative(u);
    }
  }
  return 1.0;
}

void SamplingScheme::validate() const {
  if (kind == Kind::power && !(parameter > 0.0))
    throw ConfigError("power sampling scheme needs a positive exponent");
  if (kind == Kind::sine && !(std::abs(parameter) < 1.0))
    throw ConfigError("sine sampling scheme needs |c| < 1");
}

double seasonality(double t) { return 0.1 * (1.0 - std::cbrt(t) + 0.5 * t * t); }

std::size_t ScenarioConfig::n_component(int l) const {
  if (n_per_component.empty()) return n;
  return n_per_component.at(static_cast<std::size_t>(l));
}

double ScenarioConfig::nu(int l) const {
  return static_cast<double>(n) / static_cast<double>(n_component(l));
}

double ScenarioConfig::eta(int l) const {
  return noise.eta.size() == 1 ? noise.eta.front() : noise.eta.at(static_cast<std::size_t>(l));
}

double ScenarioConfig::drift_of(int l) const {
  if (drift.empty()) return 0.0;
  return drift.size() == 1 ? drift.front() : drift.at(static_cast<std::size_t>(l));
}

const SamplingScheme& ScenarioConfig::scheme(int l) const {
  static const SamplingScheme kIdentity{};
  if (sampling.empty()) return kIdentity;
  return sampling.size() == 1 ? sampling.front() : sampling.at(static_cast<std::size_t>(l));
}

std::size_t ScenarioConfig::resolved_fine_steps() const {
  if (fine_grid_steps > 0) return fine_grid_steps;
  std::size_t max_n = n;
  for (int l = 0; l < d; ++l) max_n = std::max(max_n, n_component(l));
  return 10 * max_n;
}

void ScenarioConfig::validate() const {
  if (d < 1) throw ConfigError("d must be >= 1");
  if (n < 2) throw ConfigError("n must be >= 2");
  if (h_inv < 1) throw ConfigError("h_inv must be >= 1");
  if (!n_per_component.empty() && static_cast<int>(n_per_component.size()) != d)
    throw ConfigError("n_per_component must have d entries");
  std::size_t max_n = n;
  for (int l = 0; l < d; ++l) {
    if (n_component(l) < 2) throw ConfigError("every component needs n_l >= 2");
    max_n = std::max(max_n, n_component(l));
  }
  if (fine_grid_steps != 0 && fine_grid_steps < 10 * max_n)
    throw ConfigError("fine_grid_steps must be >= 10 max_l n_l");
  if (noise.eta.empty() || (noise.eta.size() != 1 && static_cast<int>(noise.eta.size()) != d))
    throw ConfigError("noise.eta must have 1 or d entries");
  for (double e : noise.eta)
    if (!(e >= 0.0) || !std::isfinite(e)) throw ConfigError("noise levels must be finite and >= 0");
  if (!drift.empty() && drift.size() != 1 && static_cast<int>(drift.size()) != d)
    throw ConfigError("drift must have 1 or d entries");
  if (!sampling.empty() && sampling.size() != 1 && static_cast<int>(sampling.size()) != d)
    throw ConfigError("sampling must have 1 or d entries");
  for (const auto& s : sampling) s.validate();

  const auto& v = volatility;
  switch (v.kind) {
    case VolatilityModel::Kind::constant:
      if (v.covolatility.rows() != d || v.covolatility.cols() != d)
        throw ConfigError("constant covolatility must be d x d");
      if ((v.covolatility - v.covolatility.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw ConfigError("covolatility must be symmetric");
      if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(v.covolatility).eigenvalues().minCoeff() <
          -1e-12)
        throw ConfigError("covolatility must be positive semidefinite");
      break;
    case VolatilityModel::Kind::stoch_vol_seasonal:
      if (!(std::abs(v.leverage) <= 1.0)) throw ConfigError("leverage must lie in [-1, 1]");
      if (!(v.sigma_tilde >= 0.0)) throw ConfigError("sigma_tilde must be >= 0");
      if (v.correlation.size() != 0 && (v.correlation.rows() != d || v.correlation.cols() != d))
        throw ConfigError("correlation must be d x d");
      break;
    case VolatilityModel::Kind::grid:
      if (v.grid_times.size() < 2 || v.grid_times.size() != v.grid_values.size())
        throw ConfigError("grid volatility needs >= 2 matching times and matrices");
      for (std::size_t i = 0; i < v.grid_times.size(); ++i) {
        if (i > 0 && !(v.grid_times[i] > v.grid_times[i - 1]))
          throw ConfigError("grid volatility times must increase");
        if (v.grid_values[i].rows() != d || v.grid_values[i].cols() != d)
          throw ConfigError("grid volatility matrices must be d x d");
      }
      break;
  }
}

ScenarioConfig ScenarioConfig::constant_1d(std::size_t n, double sigma, double eta, int h_inv,
                                           double drift) {
  ScenarioConfig c;
  c.n = n;
  c.d = 1;
  c.h_inv = h_inv;
  c.drift = {drift};
  c.volatility.kind = VolatilityModel::Kind::constant;
  c.volatility.covolatility = Eigen::MatrixXd::Constant(1, 1, sigma * sigma);
  c.noise.eta = {eta};
  return c;
}

ScenarioConfig ScenarioConfig::stoch_vol_1d(std::size_t n, double eta, double leverage, int h_inv,
                                            double drift, double sigma_tilde) {
  ScenarioConfig c;
  c.n = n;
  c.d = 1;
  c.h_inv = h_inv;
  c.drift = {drift};
  c.volatility.kind = VolatilityModel::Kind::stoch_vol_seasonal;
  c.volatility.sigma_tilde = sigma_tilde;
  c.volatility.leverage = leverage;
  c.noise.eta = {eta};
  return c;
}

const Eigen::MatrixXd& VolatilityPath::at(double t) const {
  const std::size_t N = steps();
  const double clamped = std::clamp(t, 0.0, 1.0);
  const auto idx = static_cast<std::size_t>(std::llround(clamped * static_cast<double>(N)));
  return spot[std::min(idx, N)];
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

VolatilityPath simulate_volatility(const ScenarioConfig& config, Rng& rng) {
  config.validate();
  const std::size_t N = config.resolved_fine_steps();
  const int d = config.d;
  const double dt = 1.0 / static_cast<double>(N);
  VolatilityPath vol;
  vol.times.resize(N + 1);
  for (std::size_t m = 0; m <= N; ++m) vol.times[m] = static_cast<double>(m) * dt;
  vol.spot.resize(N + 1);

  const auto& model = config.volatility;
  switch (model.kind) {
    case VolatilityModel::Kind::constant:
      std::fill(vol.spot.begin(), vol.spot.end(), model.covolatility);
      break;
    case VolatilityModel::Kind::grid:
      for (std::size_t m = 0; m <= N; ++m) vol.spot[m] = interpolate_grid(model, vol.times[m]);
      break;
    case VolatilityModel::Kind::stoch_vol_seasonal: {
      const Eigen::MatrixXd base =
          model.correlation.size() == 0 ? Eigen::MatrixXd::Identity(d, d) : model.correlation;
      vol.leverage = model.leverage;
      vol.driver.resize(N);
      std::normal_distribution<double> normal;
      const double sd = std::sqrt(dt);
      double factor = 1.0;
      for (std::size_t m = 0; m <= N; ++m) {
        double s2 = factor * seasonality(vol.times[m]);
        if (s2 < kSigmaSquaredFloor) {
          s2 = kSigmaSquaredFloor;
          ++vol.clamp_count;
        }
        vol.spot[m] = s2 * base;
        if (m < N) {
          vol.driver[m] = sd * normal(rng);
          factor += model.sigma_tilde * vol.driver[m];
        }
      }
      break;
    }
  }
  return vol;
}

const char* to_string(LeverageCoupling coupling) {
  return coupling == LeverageCoupling::conditional ? "conditional" : "independent";
}

Eigen::MatrixXd simulate_signal(const ScenarioConfig& config, const VolatilityPath& vol, Rng& rng,
                                LeverageCoupling coupling) {
  const int d = config.d;
  const std::size_t N = vol.steps();
  if (vol.dimension() != d) throw ArgumentError("volatility path dimension mismatch");
  const double dt = 1.0 / static_cast<double>(N);
  const double sd = std::sqrt(dt);
  const auto& model = config.volatility;

  Eigen::VectorXd drift_step(d);
  for (int l = 0; l < d; ++l) drift_step(l) = config.drift_of(l) * dt;

  Eigen::MatrixXd fixed_factor;
  if (model.kind == VolatilityModel::Kind::constant) {
    fixed_factor = psd_factor(model.covolatility);
  } else if (model.kind == VolatilityModel::Kind::stoch_vol_seasonal) {
    const Eigen::MatrixXd base =
        model.correlation.size() == 0 ? Eigen::MatrixXd::Identity(d, d) : model.correlation;
    fixed_factor = psd_factor(base);
  }
  const bool leverage = !vol.driver.empty() && coupling == LeverageCoupling::conditional;
  const double lam = vol.leverage;
  const double lam_c = std::sqrt(std::max(0.0, 1.0 - lam * lam));

  Eigen::MatrixXd X(d, N + 1);
  X.col(0).setZero();
  std::normal_distribution<double> normal;
  std::vector<double> dW(d);
  Eigen::MatrixXd step_factor = fixed_factor;
  for (std::size_t m = 0; m < N; ++m) {
    for (int l = 0; l < d; ++l) dW[l] = sd * normal(rng);
    if (leverage) dW[0] = lam * vol.driver[m] + lam_c * dW[0];
    double scale = 1.0;
    if (model.kind == VolatilityModel::Kind::stoch_vol_seasonal) {
      scale = std::sqrt(vol.spot[m](0, 0)) / fixed_factor(0, 0);
    } else if (model.kind == VolatilityModel::Kind::grid) {
      step_factor = psd_factor(vol.spot[m]);
    }
    for (int l = 0; l < d; ++l) {
      double inc = 0.0;
      for (int c = 0; c < d; ++c) inc += step_factor(l, c) * dW[c];
      X(l, m + 1) = X(l, m) + drift_step(l) + scale * inc;
    }
  }
  return X;
}

PathBundle simulate_paths(const ScenarioConfig& config, Rng& rng) {
  PathBundle out;
  out.volatility = simulate_volatility(config, rng);
  out.signal = simulate_signal(config, out.volatility, rng);
  return out;
}

PathBundle simulate_paths(const ScenarioConfig& config) {
  Rng rng(stream_seed(config.seed, 0));
  return simulate_paths(config, rng);
}

std::vector<double> sampling_times(const ScenarioConfig& config, int l, Rng& rng) {
  const std::size_t nl = config.n_component(l);
  const auto& scheme = config.scheme(l);
  std::vector<double> t(nl + 1);
  if (scheme.is_random()) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (;;) {
      for (std::size_t i = 1; i < nl; ++i) t[i] = unif(rng);
      std::sort(t.begin() + 1, t.end() - 1);
      t.front() = 0.0;
      t.back() = 1.0;
      bool strict = true;
      for (std::size_t i = 1; i <= nl && strict; ++i) strict = t[i] > t[i - 1];
      if (strict) break;
    }
    return t;
  }
  for (std::size_t i = 0; i <= nl; ++i)
    t[i] = scheme.quantile(static_cast<double>(i) / static_cast<double>(nl));
  t.front() = 0.0;
  t.back() = 1.0;
  return t;
}

ObservationSet sample_noisy_observations(const PathBundle& paths, const ScenarioConfig& config,
                                         Rng& rng) {
  const int d = config.d;
  if (paths.dimension() != d) throw ArgumentError("path dimension does not match config");
  const std::size_t N = paths.volatility.steps();
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  ObservationSet obs;
  obs.components.resize(d);
  for (int l = 0; l < d; ++l) {
    auto& c = obs.components[l];
    c.times = sampling_times(config, l, rng);
    c.values.resize(c.times.size());
    const double eta = config.eta(l);
    for (std::size_t i = 0; i < c.times.size(); ++i) {
      const auto idx = static_cast<std::size_t>(std::llround(c.times[i] * static_cast<double>(N)));
      double noise = 0.0;
      if (eta > 0.0) {
        switch (config.noise.distribution) {
          case NoiseDistribution::gaussian:
            noise = eta * normal(rng);
            break;
          case NoiseDistribution::uniform:
            noise = eta * std::sqrt(3.0) * unif(rng);
            break;
          case NoiseDistribution::two_point:
            noise = coin(rng) ? eta : -eta;
            break;
        }
      }
      c.values[i] = paths.signal(l, static_cast<Eigen::Index>(std::min(idx, N))) + noise;
    }
  }
  return obs;
}

Eigen::MatrixXd true_integrated_covolatility(const VolatilityPath& vol, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ArgumentError("t must lie in [0, 1]");
  const std::size_t N = vol.steps();
  const int d = vol.dimension();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t m = 0; m < N; ++m) {
    const double a = vol.times[m];
    const double b = vol.times[m + 1];
    if (a >= t) break;
    if (b <= t) {
      acc += 0.5 * (b - a) * (vol.spot[m] + vol.spot[m + 1]);
    } else {
      const double w = (t - a) / (b - a);
      const Eigen::MatrixXd end = (1.0 - w) * vol.spot[m] + w * vol.spot[m + 1];
      acc += 0.5 * (t - a) * (vol.spot[m] + end);
    }
  }
  return acc;
}

Eigen::MatrixXd true_integrated_covolatility(const PathBundle& paths, double t) {
  return true_integrated_covolatility(paths.volatility, t);
}

std::vector<double> spot_variance_at_bin_edges(const VolatilityPath& vol, double bin_width,
                                               int n_bins, int p) {
  std::vector<double> out(n_bins);
  for (int k = 1; k <= n_bins; ++k) out[k - 1] = vol.at((k - 1) * bin_width)(p, p);
  return out;
}

}  // namespace specvol
