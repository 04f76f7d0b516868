#include "specvol/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#include "specvol/basis.hpp"
#include "specvol/errors.hpp"
#include "specvol/matrix_ops.hpp"

namespace specvol {

namespace {

void check_horizon(const VolatilityPath& vol, double t) {
  if (vol.times.size() < 2) throw ArgumentError("volatility path needs at least two points");
  if (!(t >= 0.0 && t <= vol.times.back() + 1e-12))
    throw ArgumentError("horizon outside the volatility path");
}

// Trapezoid of matrix-valued f(i) over [0, t], partial last interval by
// linear interpolation.
template <class F>
Eigen::MatrixXd integrate_matrix(const std::vector<double>& times, double t, F&& f) {
  Eigen::MatrixXd prev = f(0);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(prev.rows(), prev.cols());
  for (std::size_t i = 1; i < times.size() && times[i - 1] < t; ++i) {
    Eigen::MatrixXd cur = f(i);
    const double dt = times[i] - times[i - 1];
    if (times[i] <= t) {
      acc += 0.5 * dt * (prev + cur);
    } else {
      const double w = (t - times[i - 1]) / dt;
      const Eigen::MatrixXd end = prev + w * (cur - prev);
      acc += 0.5 * (t - times[i - 1]) * (prev + end);
    }
    prev = std::move(cur);
  }
  return acc;
}

std::vector<double> times_up_to(const std::vector<double>& times, double t) {
  std::vector<double> out;
  for (double s : times) {
    if (s > t) break;
    out.push_back(s);
  }
  return out;
}

}  // namespace

double integrate_trapezoid(const std::vector<double>& times, const std::vector<double>& values,
                           double t) {
  if (times.size() != values.size()) throw ArgumentError("times and values differ in length");
  if (times.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 1; i < times.size() && times[i - 1] < t; ++i) {
    const double dt = times[i] - times[i - 1];
    if (times[i] <= t) {
      acc += 0.5 * dt * (values[i - 1] + values[i]);
    } else {
      const double end = values[i - 1] + (t - times[i - 1]) / dt * (values[i] - values[i - 1]);
      acc += 0.5 * (t - times[i - 1]) * (values[i - 1] + end);
    }
  }
  return acc;
}

AsymptoticTarget avar_iv(const VolatilityPath& vol, double eta, double t, int p) {
  check_horizon(vol, t);
  if (p < 0 || p >= vol.dimension()) throw ArgumentError("component outside the path dimension");
  AsymptoticTarget out;
  out.times = times_up_to(vol.times, t);
  std::vector<double> f(vol.times.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double s2 = std::max(vol.spot[i](p, p), 0.0);
    f[i] = 8.0 * eta * s2 * std::sqrt(s2);
  }
  out.value = Eigen::MatrixXd::Constant(1, 1, integrate_trapezoid(vol.times, f, t));
  out.integrand.assign(f.begin(), f.begin() + out.times.size());
  return out;
}

double avar_iv(double sigma, double eta, double t) {
  const double s = std::abs(sigma);
  return 8.0 * eta * s * s * s * t;
}

double icv_closed_form_a(const Eigen::MatrixXd& sigma, int p, int q, double qp, double qq,
                         double nu_p, double nu_q) {
  const double ratio = (qq * nu_q) / (qp * nu_p);
  return sigma(p, p) * ratio + sigma(q, q) / ratio;
}

double icv_closed_form_b(const Eigen::MatrixXd& sigma, int p, int q) {
  return 4.0 * (sigma(p, p) * sigma(q, q) + sigma(p, q) * sigma(p, q));
}

double icv_closed_form_integrand(const Eigen::MatrixXd& sigma, int p, int q, double qp, double qq,
                                 double nu_p, double nu_q) {
  using C = std::complex<double>;
  const double a = icv_closed_form_a(sigma, p, q, qp, qq, nu_p, nu_q);
  const double b = icv_closed_form_b(sigma, p, q);
  const double disc = a * a - b;
  const double sgn = disc > 0.0 ? 1.0 : -1.0;
  const C root = std::sqrt(C(disc, 0.0));
  const C bracket = std::sqrt(C(a, 0.0) + root) - sgn * std::sqrt(C(a, 0.0) - root);
  const C prefactor = 2.0 * std::sqrt(C(qp * qq * nu_p * nu_q * disc * b, 0.0));
  const C v2 = prefactor * bracket;
  const double scale = std::max(std::abs(v2), 1e-300);
  if (std::abs(v2.imag()) > 1e-8 * scale || v2.real() < -1e-12 * scale) {
    std::ostringstream msg;
    msg << "closed-form variance is not a nonnegative real: A = " << a << ", B = " << b
        << ", value = " << v2.real() << (v2.imag() >= 0 ? "+" : "") << v2.imag() << "i";
    throw NumericDomainError(msg.str());
  }
  return std::max(v2.real(), 0.0);
}

AsymptoticTarget avar_icv_closed_form(const VolatilityPath& vol, const SamplingScheme& fp,
                                      const SamplingScheme& fq, double nu_p, double nu_q, int p,
                                      int q, double t) {
  check_horizon(vol, t);
  const int d = vol.dimension();
  if (p < 0 || q < 0 || p >= d || q >= d) throw ArgumentError("component outside the path dimension");
  AsymptoticTarget out;
  out.reference_only = true;
  out.times = times_up_to(vol.times, t);
  std::vector<double> f(vol.times.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double s = vol.times[i];
    f[i] = icv_closed_form_integrand(vol.spot[i], p, q, fp.quantile_derivative(s),
                                     fq.quantile_derivative(s), nu_p, nu_q);
  }
  out.value = Eigen::MatrixXd::Constant(1, 1, integrate_trapezoid(vol.times, f, t));
  out.integrand.assign(f.begin(), f.begin() + out.times.size());
  return out;
}

double avar_icv_riemann(const std::vector<Eigen::MatrixXd>& sigma, const Eigen::VectorXd& eta,
                        std::size_t n_p, std::size_t n_q, int p, int q) {
  if (sigma.empty()) throw ArgumentError("need at least one bin");
  const int B = static_cast<int>(sigma.size());
  const BinGrid grid = BinGrid::unit(B);
  const std::size_t n = std::min(n_p, n_q);
  const FrequencyRange freq = FrequencyRange::for_grid(grid, n);
  const double h = grid.width();
  double total = 0.0;
  for (int k = 1; k <= B; ++k) {
    double info = 0.0;
    for (int j = 1; j <= freq.j_max; ++j) {
      const double np = eta(p) * eta(p) * discrete_weight_norm(j, n_p, grid) / static_cast<double>(n_p);
      const double nq = eta(q) * eta(q) * discrete_weight_norm(j, n_q, grid) / static_cast<double>(n_q);
      const Eigen::MatrixXd& s = sigma[k - 1];
      const double cross = s(p, q) + (p == q ? np : 0.0);
      info += 1.0 / ((s(p, p) + np) * (s(q, q) + nq) + cross * cross);
    }
    total += h * h / info;
  }
  return std::sqrt(static_cast<double>(n)) * total;
}

Eigen::MatrixXd acov_lmm(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& h_diag, double t) {
  const Eigen::MatrixXd root = noise_scaled_root(sigma, h_diag);
  Eigen::MatrixXd out = 2.0 * t * (kronecker(sigma, root) + kronecker(root, sigma));
  return 0.5 * (out + out.transpose());
}

AsymptoticTarget acov_lmm(const VolatilityPath& vol, const std::vector<double>& eta,
                          const std::vector<double>& nu,
                          const std::vector<SamplingScheme>& schemes, double t) {
  check_horizon(vol, t);
  const int d = vol.dimension();
  if (static_cast<int>(eta.size()) != d || static_cast<int>(nu.size()) != d ||
      static_cast<int>(schemes.size()) != d)
    throw ArgumentError("need eta, nu and a sampling scheme per component");
  for (double e : eta)
    if (!(e > 0.0)) throw ArgumentError("noise levels must be positive");
  AsymptoticTarget out;
  out.times = times_up_to(vol.times, t);
  out.integrand.resize(out.times.size());
  auto integrand = [&](std::size_t i) {
    const double s = vol.times[i];
    Eigen::VectorXd h(d);
    for (int l = 0; l < d; ++l)
      h(l) = eta[l] * std::sqrt(nu[l]) / std::sqrt(schemes[l].cdf_derivative(s));
    const Eigen::MatrixXd root = noise_scaled_root(vol.spot[i], h);
    Eigen::MatrixXd m = 2.0 * (kronecker(vol.spot[i], root) + kronecker(root, vol.spot[i]));
    if (i < out.integrand.size()) out.integrand[i] = m.trace();
    return m;
  };
  Eigen::MatrixXd value = integrate_matrix(vol.times, t, integrand);
  value = 0.5 * (value + value.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(value);
  if (eig.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, value.norm()))
    throw NumericDomainError("asymptotic covariance is not positive semidefinite");
  out.value = std::move(value);
  return out;
}

RealizedCovariance realized_covariance_baseline(const ObservationSet& obs,
                                                const VolatilityPath& vol) {
  obs.validate();
  const int d = obs.dimension();
  if (vol.dimension() != d) throw ArgumentError("path and observations differ in dimension");
  const std::size_t n = obs[0].n();
  for (int p = 1; p < d; ++p)
    if (obs[p].times != obs[0].times) throw ArgumentError("realized covariance needs synchronous data");
  RealizedCovariance out;
  out.estimate = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd dx(d);
  for (std::size_t i = 1; i <= n; ++i) {
    for (int p = 0; p < d; ++p) dx(p) = obs[p].values[i] - obs[p].values[i - 1];
    out.estimate.noalias() += dx * dx.transpose();
  }
  const double t = obs[0].times.back();
  check_horizon(vol, t);
  const Eigen::MatrixXd z = symmetrizer_z(d);
  out.avar = integrate_matrix(vol.times, t, [&](std::size_t i) -> Eigen::MatrixXd {
    return kronecker(vol.spot[i], vol.spot[i]) * z;
  });
  return out;
}

}  // namespace specvol
