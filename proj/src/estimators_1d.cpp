#include "specvol/estimators_1d.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <string>

#include "specvol/errors.hpp"
#include "specvol/stats.hpp"

namespace specvol {

namespace {

void require_regular(const ObservationSet& obs) {
  obs.validate();
  if (obs.dimension() != 1) throw ArgumentError("one-dimensional estimator needs d = 1");
  if (!obs[0].is_equidistant())
    throw ArgumentError("one-dimensional estimator needs observations on the grid i/n");
}

std::size_t regular_n(const SpectralArray& stats) {
  const std::size_t n = stats.grid().n();
  if (n == 0 || stats.dimension() != 1)
    throw ArgumentError("spectral array must come from one regular component");
  return n;
}

struct Prepared {
  BinGrid grid;
  FrequencyRange freq;
  SpectralArray stats;
};

Prepared prepare(const ObservationSet& obs, const Iv1dOptions& options) {
  require_regular(obs);
  const std::size_t n = obs[0].n();
  const int h_inv = options.h_inv > 0 ? options.h_inv : default_bin_count(n);
  BinGrid grid = BinGrid::regular(n, h_inv);
  FrequencyRange freq = FrequencyRange::for_grid(grid, n, options.max_frequency);
  SpectralArray stats = spectral_statistics(obs, grid, freq, EvaluationPoint::grid_point);
  return {grid, freq, std::move(stats)};
}

std::string echo(const Iv1dOptions& o, const Prepared& p, const char* mode) {
  nlohmann::json j;
  j["mode"] = mode;
  j["h_inv"] = p.grid.n_bins();
  j["bin_width"] = p.grid.width();
  j["t_end"] = p.grid.t_end();
  j["j_max"] = p.freq.j_max;
  j["pilot_frequencies"] = o.pilot_frequencies;
  j["pilot_window"] = o.pilot_window;
  j["debias_noise"] = o.debias_noise;
  j["noise_uncertainty"] = o.noise_uncertainty;
  return j.dump();
}

}  // namespace

const char* to_string(WeightsMode mode) {
  return mode == WeightsMode::oracle ? "oracle" : "adaptive";
}

WeightTable1D::WeightTable1D(int n_bins, int j_max, WeightsMode mode)
    : n_bins_(n_bins),
      j_max_(j_max),
      mode_(mode),
      weights_(static_cast<std::size_t>(n_bins) * j_max, 0.0),
      info_(static_cast<std::size_t>(n_bins) * j_max, 0.0),
      total_(n_bins, 0.0) {}

double estimate_noise_variance(const ComponentObservations& obs) {
  const std::size_t n = obs.n();
  if (n < 1) throw ArgumentError("noise variance needs at least 2 observations");
  double sum = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const double d = obs.values[i] - obs.values[i - 1];
    sum += d * d;
  }
  return sum / (2.0 * static_cast<double>(n));
}

double debias_noise_variance(double eta2_raw, double integrated_variance, std::size_t n) {
  const double corrected = eta2_raw - integrated_variance / (2.0 * static_cast<double>(n));
  return std::max(corrected, 0.01 * eta2_raw);
}

double debiasing_gain(double eta2_raw, double eta2, double slope, std::size_t n) {
  if (eta2 <= 0.01 * eta2_raw * (1.0 + 1e-12)) return 0.01;
  const double b = slope / (2.0 * static_cast<double>(n));
  return b < 0.9 ? 1.0 / (1.0 - b) : 10.0;
}

int default_pilot_window(std::size_t n) {
  return static_cast<int>(std::lround(std::pow(static_cast<double>(n), 0.25) / 2.0));
}

int default_bin_count(std::size_t n) {
  const double dn = static_cast<double>(n);
  const double scale = 25.0 / (std::sqrt(30000.0) / std::log(30000.0));
  return std::max(1, static_cast<int>(std::lround(scale * std::sqrt(dn) / std::log(dn))));
}

std::vector<double> pilot_spot_volatility_raw(const SpectralArray& stats, int pilot_frequencies,
                                              int window, double eta2) {
  const std::size_t n = regular_n(stats);
  if (pilot_frequencies < 1 || pilot_frequencies > stats.j_max())
    throw ArgumentError("pilot frequency count must lie in 1..j_max");
  if (window < 0) throw ArgumentError("pilot window must be >= 0");
  const int B = stats.n_bins();
  const double dn = static_cast<double>(n);

  std::vector<double> per_bin(B);
  for (int m = 1; m <= B; ++m) {
    double acc = 0.0;
    for (int j = 1; j <= pilot_frequencies; ++j) {
      const double s = stats(m, j, 0);
      acc += s * s - discrete_weight_norm(j, n, stats.grid()) * eta2 / dn;
    }
    per_bin[m - 1] = acc / pilot_frequencies;
  }
  std::vector<double> out(B);
  for (int k = 1; k <= B; ++k) {
    const int lo = std::max(1, k - window);
    const int hi = std::min(B, k + window);
    double acc = 0.0;
    for (int m = lo; m <= hi; ++m) acc += per_bin[m - 1];
    out[k - 1] = acc / (hi - lo + 1);
  }
  return out;
}

std::vector<double> floor_pilot(std::vector<double> pilot) {
  std::vector<double> sorted = pilot;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  double median = sorted[sorted.size() / 2];
  if (sorted.size() % 2 == 0) {
    const double lower = *std::max_element(sorted.begin(), sorted.begin() + sorted.size() / 2);
    median = 0.5 * (median + lower);
  }
  const double floor = std::max(1e-8, 0.05 * median);
  for (double& v : pilot) v = std::max(v, floor);
  return pilot;
}

std::vector<double> pilot_spot_volatility(const SpectralArray& stats, int pilot_frequencies,
                                          int window, double eta2) {
  return floor_pilot(pilot_spot_volatility_raw(stats, pilot_frequencies, window, eta2));
}

WeightTable1D optimal_weights_1d(std::span<const double> sigma2, double eta2, std::size_t n,
                                 const BinGrid& grid, const FrequencyRange& freq,
                                 WeightsMode mode) {
  if (static_cast<int>(sigma2.size()) != grid.n_bins())
    throw ArgumentError("need one spot variance per bin");
  if (!(eta2 >= 0.0)) throw ArgumentError("noise variance must be >= 0");
  WeightTable1D table(grid.n_bins(), freq.j_max, mode);
  const double dn = static_cast<double>(n);
  std::vector<double> noise(freq.j_max);
  for (int j = 1; j <= freq.j_max; ++j) noise[j - 1] = eta2 / dn * discrete_weight_norm(j, n, grid);

  for (int k = 1; k <= grid.n_bins(); ++k) {
    const double s2 = sigma2[k - 1];
    if (!(s2 > 0.0)) throw ArgumentError("spot variances must be positive; floor pilots first");
    double total = 0.0;
    for (int j = 1; j <= freq.j_max; ++j) {
      const double v = s2 + noise[j - 1];
      table.info(k, j) = 0.5 / (v * v);
      total += table.info(k, j);
    }
    table.total_info(k) = total;
    for (int j = 1; j <= freq.j_max; ++j) table.weight(k, j) = table.info(k, j) / total;
  }
  return table;
}

EstimateReport spectral_iv(const SpectralArray& stats, const WeightTable1D& weights, double eta2) {
  const std::size_t n = regular_n(stats);
  if (weights.n_bins() != stats.n_bins() || weights.j_max() != stats.j_max())
    throw ArgumentError("weight table does not match the spectral array");
  const BinGrid& grid = stats.grid();
  const double h = grid.width();
  const double dn = static_cast<double>(n);

  EstimateReport r;
  r.estimator = "iv";
  r.mode = weights.mode();
  r.noise_variance = {eta2};
  double est = 0.0;
  double var = 0.0;
  for (int k = 1; k <= stats.n_bins(); ++k) {
    double local = 0.0;
    for (int j = 1; j <= stats.j_max(); ++j) {
      const double s = stats(k, j, 0);
      local += weights.weight(k, j) * (s * s - eta2 / dn * discrete_weight_norm(j, n, grid));
    }
    est += h * local;
    var += h * h / weights.total_info(k);
    r.times.push_back(grid.right(k));
    r.local.push_back(local);
    r.estimate.push_back(est);
    r.variance.push_back(var);
  }
  return r;
}

std::pair<double, double> confidence_interval(const EstimateReport& report, double level,
                                              std::size_t i) {
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("confidence level must lie in (0, 1)");
  if (i >= report.estimate.size()) throw ArgumentError("time index out of range");
  const double v = report.variance[i];
  if (!(v > 0.0)) throw NumericDomainError("variance estimate must be positive");
  const double half = normal_quantile(0.5 * (1.0 + level)) * std::sqrt(v);
  return {report.estimate[i] - half, report.estimate[i] + half};
}

std::pair<double, double> confidence_interval(const EstimateReport& report, double level) {
  if (report.estimate.empty()) throw ArgumentError("empty report");
  return confidence_interval(report, level, report.estimate.size() - 1);
}

EstimateReport estimate_iv_adaptive(const ObservationSet& obs, const Iv1dOptions& options) {
  Prepared prep = prepare(obs, options);
  const std::size_t n = obs[0].n();
  const int pilot_j = std::min(options.pilot_frequencies, prep.freq.j_max);
  const int window = options.pilot_window >= 0 ? options.pilot_window : default_pilot_window(n);

  const double eta2_raw = estimate_noise_variance(obs[0]);
  double eta2 = eta2_raw;
  std::vector<double> pilot = pilot_spot_volatility_raw(prep.stats, pilot_j, window, eta2);
  if (options.debias_noise) {
    // The pilot depends on eta2 and the debiasing on the pilot: iterate to
    // the fixed point so that the weights use a pilot consistent with eta2.
    for (int it = 0; it < 100; ++it) {
      double iv_pilot = 0.0;
      for (double v : pilot) iv_pilot += prep.grid.width() * v;
      const double next = debias_noise_variance(eta2_raw, iv_pilot, n);
      const bool done = std::abs(next - eta2) <= 1e-12 * eta2_raw;
      eta2 = next;
      pilot = pilot_spot_volatility_raw(prep.stats, pilot_j, window, eta2);
      if (done) break;
    }
  }
  const double h = prep.grid.width();
  const int B = prep.grid.n_bins();
  const double dn = static_cast<double>(n);
  // sensitivity of eta2 to S_jk^2: eta2_raw ~ sum S^2 / (2 n^2), the pilot
  // integrated variance is linear in S^2 for j <= pilot_j, and the fixed
  // point multiplies both by the gain
  std::vector<double> u_high(B), u_low(B);
  if (options.noise_uncertainty) {
    double gain = 1.0;
    bool floored = false;
    if (options.debias_noise && eta2 > 0.0) {
      const std::vector<double> at_zero = pilot_spot_volatility_raw(prep.stats, pilot_j, window, 0.0);
      double b = 0.0;
      for (int m = 0; m < B; ++m) b += h * (at_zero[m] - pilot[m]) / eta2;
      gain = debiasing_gain(eta2_raw, eta2, b, n);
      floored = eta2 <= 0.01 * eta2_raw * (1.0 + 1e-12);
    }
    for (int k = 1; k <= B; ++k) {
      double share = 0.0;
      if (options.debias_noise && !floored)
        for (int m = std::max(1, k - window); m <= std::min(B, k + window); ++m)
          share += h / (pilot_j * (std::min(B, m + window) - std::max(1, m - window) + 1.0));
      u_high[k - 1] = gain / (2.0 * dn * dn);
      u_low[k - 1] = u_high[k - 1] - gain * share / (2.0 * dn);
    }
  }
  pilot = floor_pilot(std::move(pilot));
  WeightTable1D weights =
      optimal_weights_1d(pilot, eta2, n, prep.grid, prep.freq, WeightsMode::adaptive);
  EstimateReport r = spectral_iv(prep.stats, weights, eta2);
  if (options.noise_uncertainty) {
    // Var(S_jk^2) = 1 / info_jk under the working model
    double var_eta = 0.0;
    for (int k = 1; k <= B; ++k)
      for (int j = 1; j <= weights.j_max(); ++j) {
        const double u = j <= pilot_j ? u_low[k - 1] : u_high[k - 1];
        var_eta += u * u / weights.info(k, j);
      }
    double slope = 0.0, cov = 0.0;
    for (int k = 1; k <= B; ++k) {
      for (int j = 1; j <= weights.j_max(); ++j) {
        const double u = j <= pilot_j ? u_low[k - 1] : u_high[k - 1];
        slope -= h * weights.weight(k, j) * discrete_weight_norm(j, n, prep.grid) / dn;
        cov += h * weights.weight(k, j) * u / weights.info(k, j);
      }
      r.variance[k - 1] += 2.0 * slope * cov + slope * slope * var_eta;
    }
  }
  Iv1dOptions resolved = options;
  resolved.pilot_window = window;
  resolved.pilot_frequencies = pilot_j;
  r.config_echo = echo(resolved, prep, "adaptive");
  return r;
}

EstimateReport estimate_iv_oracle(const ObservationSet& obs, std::span<const double> sigma2,
                                  double eta2, const Iv1dOptions& options) {
  Prepared prep = prepare(obs, options);
  WeightTable1D weights =
      optimal_weights_1d(sigma2, eta2, obs[0].n(), prep.grid, prep.freq, WeightsMode::oracle);
  EstimateReport r = spectral_iv(prep.stats, weights, eta2);
  r.config_echo = echo(options, prep, "oracle");
  return r;
}

}  // namespace specvol
