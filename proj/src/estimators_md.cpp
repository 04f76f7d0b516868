#include "specvol/estimators_md.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "specvol/errors.hpp"
#include "specvol/matrix_ops.hpp"

namespace specvol {

namespace {

constexpr double kRegularization = 1e-10;

void check_pair(int p, int q, int d) {
  if (p < 0 || q < 0 || p >= d || q >= d)
    throw ArgumentError("component pair (" + std::to_string(p) + ", " + std::to_string(q) +
                        ") outside 0.." + std::to_string(d - 1));
}

void check_noise(const SpectralArray& stats, const NoiseTerms& noise) {
  if (noise.n_bins() != stats.n_bins() || noise.j_max() != stats.j_max() ||
      noise.dimension() != stats.dimension())
    throw ArgumentError("noise terms do not match the spectral array");
}

void check_sigma(const std::vector<Eigen::MatrixXd>& sigma, int n_bins, int d) {
  if (static_cast<int>(sigma.size()) != n_bins)
    throw ArgumentError("need one covolatility matrix per bin");
  for (const auto& s : sigma)
    if (s.rows() != d || s.cols() != d) throw ArgumentError("covolatility matrix has wrong size");
}

Eigen::MatrixXd statistic_outer(const SpectralArray& stats, int k, int j, const Eigen::VectorXd& n) {
  const int d = stats.dimension();
  Eigen::VectorXd s(d);
  for (int p = 0; p < d; ++p) s(p) = stats(k, j, p);
  Eigen::MatrixXd m = s * s.transpose();
  m.diagonal() -= n;
  return m;
}

Eigen::MatrixXd gain_matrix(const SpectralArray& stats, int k, int j) {
  const int d = stats.dimension();
  Eigen::MatrixXd g(d, d);
  for (int p = 0; p < d; ++p)
    for (int q = 0; q < d; ++q) g(p, q) = stats.gain(k, j, p, q);
  return g;
}

// Var(S^(p) S^(q)) for Gaussian statistics with covariance
// Sigma o G + diag(N).
double product_variance(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& gain, double noise_p,
                        double noise_q, int p, int q) {
  const double cross = sigma(p, q) * gain(p, q) + (p == q ? noise_p : 0.0);
  const double var = (sigma(p, p) * gain(p, p) + noise_p) * (sigma(q, q) * gain(q, q) + noise_q) +
                     cross * cross;
  if (!(var > 0.0)) throw NumericDomainError("variance of the statistic product must be positive");
  return var;
}

// (Sigma o G + diag(N))^{-1}; adds kRegularization E_d when the Cholesky
// factorisation fails.
Eigen::MatrixXd inverse_covariance(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& noise,
                                   std::size_t& regularized,
                                   const Eigen::MatrixXd* gain = nullptr) {
  Eigen::MatrixXd c = gain ? Eigen::MatrixXd(sigma.cwiseProduct(*gain)) : sigma;
  c.diagonal() += noise;
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) {
    ++regularized;
    c.diagonal().array() += kRegularization;
    llt.compute(c);
    if (llt.info() != Eigen::Success)
      throw NumericDomainError("covariance of the spectral statistics is not positive definite");
  }
  return llt.solve(Eigen::MatrixXd::Identity(c.rows(), c.cols()));
}

Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& a) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success)
    throw NumericDomainError("Fisher information matrix is not positive definite");
  return llt.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
}

std::size_t min_increments(const ObservationSet& obs) {
  std::size_t n = obs[0].n();
  for (int p = 1; p < obs.dimension(); ++p) n = std::min(n, obs[p].n());
  return n;
}

struct Layout {
  BinGrid grid;
  FrequencyRange freq;
};

Layout layout(const ObservationSet& obs, const MdOptions& options) {
  obs.validate();
  const std::size_t n = min_increments(obs);
  const int h_inv = options.h_inv > 0 ? options.h_inv : default_bin_count(n);
  BinGrid grid = BinGrid::unit(h_inv);
  FrequencyRange freq = FrequencyRange::for_grid(grid, n, options.max_frequency);
  return {grid, freq};
}

std::string echo(const MdOptions& o, const BinGrid& grid, const FrequencyRange& freq,
                 const Eigen::VectorXd& eta2, const char* mode) {
  nlohmann::json j;
  j["mode"] = mode;
  j["h_inv"] = grid.n_bins();
  j["bin_width"] = grid.width();
  j["j_max"] = freq.j_max;
  j["pilot_frequencies"] = o.pilot_frequencies;
  j["pilot_window"] = o.pilot_window;
  j["noise_norm"] = to_string(o.norm);
  j["debias_noise"] = o.debias_noise;
  j["noise_uncertainty"] = o.noise_uncertainty;
  j["noise_variance"] = std::vector<double>(eta2.data(), eta2.data() + eta2.size());
  return j.dump();
}

}  // namespace

const char* to_string(NoiseNorm norm) {
  return norm == NoiseNorm::empirical ? "empirical" : "continuous";
}

NoiseTerms::NoiseTerms(int n_bins, int j_max, int d)
    : n_bins_(n_bins),
      j_max_(j_max),
      d_(d),
      values_(static_cast<std::size_t>(n_bins) * j_max * d, 0.0) {
  if (n_bins < 1 || j_max < 1 || d < 1) throw ArgumentError("noise terms need positive sizes");
}

Eigen::VectorXd NoiseTerms::at(int k, int j) const {
  Eigen::VectorXd v(d_);
  for (int p = 0; p < d_; ++p) v(p) = (*this)(k, j, p);
  return v;
}

void NoiseTerms::scale_component(int p, double factor) {
  for (int k = 1; k <= n_bins_; ++k)
    for (int j = 1; j <= j_max_; ++j) (*this)(k, j, p) *= factor;
}

Eigen::VectorXd estimate_noise_variances(const ObservationSet& obs) {
  obs.validate();
  Eigen::VectorXd eta2(obs.dimension());
  for (int p = 0; p < obs.dimension(); ++p) eta2(p) = estimate_noise_variance(obs[p]);
  return eta2;
}

NoiseLevelEstimate estimate_local_noise_levels(const ObservationSet& obs, const BinGrid& grid) {
  obs.validate();
  const int d = obs.dimension();
  const int B = grid.n_bins();
  const double h = grid.width();
  NoiseLevelEstimate out;
  out.levels.assign(B, Eigen::VectorXd::Zero(d));
  for (int p = 0; p < d; ++p) {
    const auto& c = obs[p];
    const double scale = estimate_noise_variance(c) / h;
    std::vector<double> dt2(B, 0.0);
    std::vector<int> count(B, 0);
    for (std::size_t v = 1; v <= c.n(); ++v) {
      const int k = grid.bin_of(0.5 * (c.times[v] + c.times[v - 1]));
      if (k == 0) continue;
      const double dt = c.times[v] - c.times[v - 1];
      dt2[k - 1] += dt * dt;
      ++count[k - 1];
    }
    for (int k = 1; k <= B; ++k) {
      int src = k;
      if (count[k - 1] == 0) {
        for (int off = 1; off < B && src == k; ++off) {
          if (k - off >= 1 && count[k - off - 1] > 0) src = k - off;
          else if (k + off <= B && count[k + off - 1] > 0) src = k + off;
        }
        if (src == k) throw ArgumentError("component has no observations inside the bins");
        out.borrowed.emplace_back(k, p);
      }
      out.levels[k - 1](p) = scale * dt2[src - 1];
    }
  }
  return out;
}

NoiseTerms empirical_noise_terms(const SpectralArray& stats, const Eigen::VectorXd& eta2) {
  if (eta2.size() != stats.dimension()) throw ArgumentError("need one noise variance per component");
  NoiseTerms out(stats.n_bins(), stats.j_max(), stats.dimension());
  for (int k = 1; k <= stats.n_bins(); ++k)
    for (int j = 1; j <= stats.j_max(); ++j)
      for (int p = 0; p < stats.dimension(); ++p) out(k, j, p) = eta2(p) * stats.noise_energy(k, j, p);
  return out;
}

NoiseTerms continuous_noise_terms(const std::vector<Eigen::VectorXd>& levels, const BinGrid& grid,
                                  const FrequencyRange& freq) {
  if (static_cast<int>(levels.size()) != grid.n_bins())
    throw ArgumentError("need one noise level vector per bin");
  const int d = static_cast<int>(levels.front().size());
  NoiseTerms out(grid.n_bins(), freq.j_max, d);
  for (int k = 1; k <= grid.n_bins(); ++k)
    for (int j = 1; j <= freq.j_max; ++j) {
      const double norm = continuous_weight_norm(j, grid);
      for (int p = 0; p < d; ++p) out(k, j, p) = levels[k - 1](p) * norm;
    }
  return out;
}

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw ArgumentError("matrix must be square");
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  const int d = static_cast<int>(sym.rows());
  const double floor = std::max(1e-8 * std::abs(sym.trace()) / d, 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(floor);
  Eigen::MatrixXd out = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

std::vector<Eigen::MatrixXd> pilot_covolatility_raw(const SpectralArray& stats,
                                                    const NoiseTerms& noise, int pilot_frequencies,
                                                    int window) {
  check_noise(stats, noise);
  if (pilot_frequencies < 1 || pilot_frequencies > stats.j_max())
    throw ArgumentError("pilot frequency count must lie in 1..j_max");
  if (window < 0) throw ArgumentError("pilot window must be >= 0");
  const int B = stats.n_bins();
  const int d = stats.dimension();
  std::vector<Eigen::MatrixXd> moment(B, Eigen::MatrixXd::Zero(d, d));
  std::vector<Eigen::MatrixXd> gain(B, Eigen::MatrixXd::Zero(d, d));
  for (int m = 1; m <= B; ++m) {
    for (int j = 1; j <= pilot_frequencies; ++j) {
      moment[m - 1] += statistic_outer(stats, m, j, noise.at(m, j));
      gain[m - 1] += gain_matrix(stats, m, j);
    }
  }
  std::vector<Eigen::MatrixXd> out(B);
  for (int k = 1; k <= B; ++k) {
    const int lo = std::max(1, k - window);
    const int hi = std::min(B, k + window);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
    for (int m = lo; m <= hi; ++m) {
      acc += moment[m - 1];
      g += gain[m - 1];
    }
    // entries without usable overlap carry no information
    out[k - 1] = acc.cwiseQuotient(g.cwiseMax(1e-12 * pilot_frequencies));
    for (int p = 0; p < d; ++p)
      for (int q = 0; q < d; ++q)
        if (!(g(p, q) > 1e-12 * pilot_frequencies)) out[k - 1](p, q) = 0.0;
  }
  return out;
}

std::vector<Eigen::MatrixXd> pilot_covolatility(const SpectralArray& stats, const NoiseTerms& noise,
                                                int pilot_frequencies, int window) {
  auto raw = pilot_covolatility_raw(stats, noise, pilot_frequencies, window);
  for (auto& m : raw) m = project_psd(m);
  return raw;
}

double bivariate_fisher_info(const Eigen::MatrixXd& sigma, double noise_p, double noise_q, int p,
                             int q) {
  check_pair(p, q, static_cast<int>(sigma.rows()));
  const Eigen::MatrixXd unit = Eigen::MatrixXd::Ones(sigma.rows(), sigma.cols());
  return 1.0 / product_variance(sigma, unit, noise_p, noise_q, p, q);
}

double bivariate_fisher_info(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& noise_level,
                             int p, int q, int j, const BinGrid& grid) {
  if (noise_level.size() != sigma.rows()) throw ArgumentError("noise level has wrong size");
  const double norm = continuous_weight_norm(j, grid);
  return bivariate_fisher_info(sigma, noise_level(p) * norm, noise_level(q) * norm, p, q);
}

WeightTable1D bivariate_weights(const std::vector<Eigen::MatrixXd>& sigma, const NoiseTerms& noise,
                                int p, int q, WeightsMode mode) {
  check_sigma(sigma, noise.n_bins(), noise.dimension());
  check_pair(p, q, noise.dimension());
  WeightTable1D table(noise.n_bins(), noise.j_max(), mode);
  for (int k = 1; k <= noise.n_bins(); ++k) {
    double total = 0.0;
    for (int j = 1; j <= noise.j_max(); ++j) {
      const double info = bivariate_fisher_info(sigma[k - 1], noise(k, j, p), noise(k, j, q), p, q);
      table.info(k, j) = info;
      total += info;
    }
    table.total_info(k) = total;
    for (int j = 1; j <= noise.j_max(); ++j) table.weight(k, j) = table.info(k, j) / total;
  }
  return table;
}

WeightTable1D bivariate_weights(const std::vector<Eigen::MatrixXd>& sigma, const SpectralArray& stats,
                                const NoiseTerms& noise, int p, int q, WeightsMode mode) {
  check_noise(stats, noise);
  check_sigma(sigma, noise.n_bins(), noise.dimension());
  check_pair(p, q, noise.dimension());
  WeightTable1D table(noise.n_bins(), noise.j_max(), mode);
  std::vector<double> slope(noise.j_max());
  for (int k = 1; k <= noise.n_bins(); ++k) {
    double total = 0.0;
    for (int j = 1; j <= noise.j_max(); ++j) {
      const Eigen::MatrixXd g = gain_matrix(stats, k, j);
      const double var = product_variance(sigma[k - 1], g, noise(k, j, p), noise(k, j, q), p, q);
      slope[j - 1] = g(p, q) / var;
      table.info(k, j) = g(p, q) * slope[j - 1];
      total += table.info(k, j);
    }
    if (!(total > 0.0)) throw NumericDomainError("bin carries no information on the covolatility");
    table.total_info(k) = total;
    for (int j = 1; j <= noise.j_max(); ++j) table.weight(k, j) = slope[j - 1] / total;
  }
  return table;
}

EstimateReport spectral_icv(const SpectralArray& stats, int p, int q, const WeightTable1D& weights,
                            const NoiseTerms& noise) {
  check_noise(stats, noise);
  check_pair(p, q, stats.dimension());
  if (weights.n_bins() != stats.n_bins() || weights.j_max() != stats.j_max())
    throw ArgumentError("weight table does not match the spectral array");
  const double h = stats.grid().width();
  EstimateReport r;
  r.estimator = "icv(" + std::to_string(p) + "," + std::to_string(q) + ")";
  r.mode = weights.mode();
  double est = 0.0;
  double var = 0.0;
  for (int k = 1; k <= stats.n_bins(); ++k) {
    double local = 0.0;
    for (int j = 1; j <= stats.j_max(); ++j) {
      double prod = stats(k, j, p) * stats(k, j, q);
      if (p == q) prod -= noise(k, j, p);
      local += weights.weight(k, j) * prod;
    }
    est += h * local;
    var += h * h / weights.total_info(k);
    r.times.push_back(stats.grid().right(k));
    r.local.push_back(local);
    r.estimate.push_back(est);
    r.variance.push_back(var);
  }
  return r;
}

LmmWeightTable lmm_weight_matrices(const std::vector<Eigen::MatrixXd>& sigma,
                                   const NoiseTerms& noise) {
  check_sigma(sigma, noise.n_bins(), noise.dimension());
  const int d = noise.dimension();
  LmmWeightTable table;
  table.weights.resize(noise.n_bins());
  table.total_info.resize(noise.n_bins());
  for (int k = 1; k <= noise.n_bins(); ++k) {
    std::vector<Eigen::MatrixXd> info(noise.j_max());
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(d * d, d * d);
    for (int j = 1; j <= noise.j_max(); ++j) {
      const Eigen::MatrixXd a = inverse_covariance(sigma[k - 1], noise.at(k, j), table.regularized);
      info[j - 1] = kronecker(a, a);
      total += info[j - 1];
    }
    Eigen::LLT<Eigen::MatrixXd> llt(total);
    if (llt.info() != Eigen::Success)
      throw NumericDomainError("Fisher information matrix is not positive definite");
    for (auto& m : info) m = llt.solve(m);
    table.weights[k - 1] = std::move(info);
    table.total_info[k - 1] = std::move(total);
  }
  return table;
}

LmmWeightTable lmm_weight_matrices(const SpectralArray& stats,
                                   const std::vector<Eigen::MatrixXd>& sigma,
                                   const NoiseTerms& noise) {
  check_noise(stats, noise);
  check_sigma(sigma, noise.n_bins(), noise.dimension());
  const int d = noise.dimension();
  LmmWeightTable table;
  table.weights.resize(noise.n_bins());
  table.total_info.resize(noise.n_bins());
  for (int k = 1; k <= noise.n_bins(); ++k) {
    std::vector<Eigen::MatrixXd> slope(noise.j_max());
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(d * d, d * d);
    for (int j = 1; j <= noise.j_max(); ++j) {
      const Eigen::MatrixXd g = gain_matrix(stats, k, j);
      const Eigen::MatrixXd a =
          inverse_covariance(sigma[k - 1], noise.at(k, j), table.regularized, &g);
      const Eigen::VectorXd gv = vec(g);
      slope[j - 1] = gv.asDiagonal() * kronecker(a, a);
      total += slope[j - 1] * gv.asDiagonal();
    }
    Eigen::LLT<Eigen::MatrixXd> llt(total);
    if (llt.info() != Eigen::Success)
      throw NumericDomainError("Fisher information matrix is not positive definite");
    for (auto& m : slope) m = llt.solve(m);
    table.weights[k - 1] = std::move(slope);
    table.total_info[k - 1] = std::move(total);
  }
  return table;
}

Eigen::MatrixXd LmmReport::final_matrix() const { return unvec(final_estimate()); }

Eigen::VectorXd LmmReport::studentize(const Eigen::MatrixXd& truth) const {
  if (truth.rows() != d || truth.cols() != d) throw ArgumentError("truth matrix has wrong size");
  const Eigen::MatrixXd root = symmetric_matrix_power(final_covariance(), -0.5);
  return root * (final_estimate() - vec(truth));
}

double LmmReport::entry_variance(int p, int q) const {
  check_pair(p, q, d);
  const Eigen::MatrixXd cz = final_covariance() * symmetrizer_z(d);
  const int i = p + d * q;
  return cz(i, i);
}

namespace {

// With `sensitivity` (d eta2(p) / d S^(p)^2 per entry), adds the error of
// the estimated noise variances: the estimate is then linear in the
// squared statistics through eta2 as well, and the extra covariance follows
// from Cov(S_a S_b, S_p^2) = 2 C_ap C_bp with C = Sigma o G + diag(N).
LmmReport lmm_pass(const SpectralArray& stats, const std::vector<Eigen::MatrixXd>& sigma,
                   const NoiseTerms& noise, const NoiseTerms* sensitivity,
                   const Eigen::VectorXd& eta2) {
  check_noise(stats, noise);
  const int d = stats.dimension();
  check_sigma(sigma, stats.n_bins(), d);
  const double h = stats.grid().width();
  LmmReport r;
  r.d = d;
  Eigen::VectorXd est = Eigen::VectorXd::Zero(d * d);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d * d, d * d);
  // derivative in eta2 and covariance with the eta2 functional, cumulative
  Eigen::MatrixXd slope = Eigen::MatrixXd::Zero(d * d, d);
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(d * d, d);
  Eigen::MatrixXd var_eta = Eigen::MatrixXd::Zero(d, d);
  std::vector<Eigen::MatrixXd> slopes, crosses;
  for (int k = 1; k <= stats.n_bins(); ++k) {
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(d * d, d * d);
    Eigen::VectorXd rhs_vec = Eigen::VectorXd::Zero(d * d);
    Eigen::MatrixXd rhs_slope = Eigen::MatrixXd::Zero(d * d, d);
    Eigen::MatrixXd rhs_cross = Eigen::MatrixXd::Zero(d * d, d);
    for (int j = 1; j <= stats.j_max(); ++j) {
      const Eigen::VectorXd n = noise.at(k, j);
      const Eigen::MatrixXd g = gain_matrix(stats, k, j);
      const Eigen::MatrixXd a = inverse_covariance(sigma[k - 1], n, r.regularized, &g);
      const Eigen::VectorXd gv = vec(g);
      info += gv.asDiagonal() * kronecker(a, a) * gv.asDiagonal();
      rhs_vec += gv.cwiseProduct(vec(a * statistic_outer(stats, k, j, n) * a));
      if (sensitivity) {
        Eigen::MatrixXd c = sigma[k - 1].cwiseProduct(g);
        c.diagonal() += n;
        for (int p = 0; p < d; ++p) {
          if (eta2(p) > 0.0)
            rhs_slope.col(p) -= n(p) / eta2(p) * gv.cwiseProduct(vec(a.col(p) * a.col(p).transpose()));
          const Eigen::VectorXd v = a * c.col(p);
          rhs_cross.col(p) += 2.0 * (*sensitivity)(k, j, p) * gv.cwiseProduct(vec(v * v.transpose()));
          for (int q = 0; q < d; ++q)
            var_eta(p, q) += 2.0 * (*sensitivity)(k, j, p) * (*sensitivity)(k, j, q) * c(p, q) * c(p, q);
        }
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success)
      throw NumericDomainError("Fisher information matrix is not positive definite");
    est += h * llt.solve(rhs_vec);
    cov += h * h * llt.solve(Eigen::MatrixXd::Identity(d * d, d * d));
    r.times.push_back(stats.grid().right(k));
    r.estimate.push_back(est);
    r.covariance.push_back(cov);
    if (sensitivity) {
      slope += h * llt.solve(rhs_slope);
      cross += h * llt.solve(rhs_cross);
      slopes.push_back(slope);
      crosses.push_back(cross);
    }
  }
  // Z acts as 2 on symmetric vectors, and the reported covariance times Z
  // is the covariance of the estimate
  for (std::size_t k = 0; k < slopes.size(); ++k) {
    const Eigen::MatrixXd& s = slopes[k];
    const Eigen::MatrixXd extra =
        s * crosses[k].transpose() + crosses[k] * s.transpose() + s * var_eta * s.transpose();
    r.covariance[k] += 0.5 * extra;
  }
  return r;
}

double statistic_square_variance(const MdPreparation& prep, int k, int j, int p) {
  const double c = prep.local.sigma[k - 1](p, p) * prep.stats.gain(k, j, p, p) + prep.noise(k, j, p);
  return 2.0 * c * c;
}

}  // namespace

LmmReport lmm_estimate(const SpectralArray& stats, const std::vector<Eigen::MatrixXd>& sigma,
                       const NoiseTerms& noise) {
  return lmm_pass(stats, sigma, noise, nullptr, Eigen::VectorXd());
}

LmmReport lmm_estimate(const SpectralArray& stats, const LmmWeightTable& table,
                       const NoiseTerms& noise) {
  check_noise(stats, noise);
  const int d = stats.dimension();
  if (static_cast<int>(table.weights.size()) != stats.n_bins())
    throw ArgumentError("weight table does not match the spectral array");
  const double h = stats.grid().width();
  LmmReport r;
  r.d = d;
  r.regularized = table.regularized;
  Eigen::VectorXd est = Eigen::VectorXd::Zero(d * d);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d * d, d * d);
  for (int k = 1; k <= stats.n_bins(); ++k) {
    const auto& w = table.weights[k - 1];
    if (static_cast<int>(w.size()) != stats.j_max())
      throw ArgumentError("weight table does not match the spectral array");
    Eigen::VectorXd local = Eigen::VectorXd::Zero(d * d);
    for (int j = 1; j <= stats.j_max(); ++j)
      local += w[j - 1] * vec(statistic_outer(stats, k, j, noise.at(k, j)));
    est += h * local;
    cov += h * h * inverse_spd(table.total_info[k - 1]);
    r.times.push_back(stats.grid().right(k));
    r.estimate.push_back(est);
    r.covariance.push_back(cov);
  }
  return r;
}

SpectralArray multivariate_statistics(const ObservationSet& obs, const MdOptions& options) {
  Layout lay = layout(obs, options);
  return spectral_statistics(obs, lay.grid, lay.freq, EvaluationPoint::midpoint);
}

MdPreparation prepare_multivariate(const ObservationSet& obs, const MdOptions& options) {
  Layout lay = layout(obs, options);
  const std::size_t n_min = min_increments(obs);
  SpectralArray stats = multivariate_statistics(obs, options);
  const int d = obs.dimension();
  const Eigen::VectorXd eta2_raw = estimate_noise_variances(obs);
  NoiseLevelEstimate levels = estimate_local_noise_levels(obs, lay.grid);
  const NoiseTerms noise_raw = options.norm == NoiseNorm::empirical
                                   ? empirical_noise_terms(stats, eta2_raw)
                                   : continuous_noise_terms(levels.levels, lay.grid, lay.freq);
  const int pilot_j = std::min(options.pilot_frequencies, lay.freq.j_max);
  const int window =
      options.pilot_window >= 0 ? options.pilot_window : default_pilot_window(n_min);
  Eigen::VectorXd eta2 = eta2_raw;
  NoiseTerms noise = noise_raw;
  auto pilot = pilot_covolatility_raw(stats, noise, pilot_j, window);
  if (options.debias_noise) {
    // fixed point of pilot and debiased noise variances, as in one dimension
    Eigen::VectorXd next(d);
    for (int it = 0; it < 100; ++it) {
      for (int p = 0; p < d; ++p) {
        double iv = 0.0;
        for (const auto& m : pilot) iv += lay.grid.width() * m(p, p);
        next(p) = debias_noise_variance(eta2_raw(p), iv, obs[p].n());
      }
      const bool done = (next - eta2).cwiseAbs().maxCoeff() <= 1e-12 * eta2_raw.maxCoeff();
      eta2 = next;
      noise = noise_raw;
      for (int p = 0; p < d; ++p)
        if (eta2_raw(p) > 0.0) noise.scale_component(p, eta2(p) / eta2_raw(p));
      pilot = pilot_covolatility_raw(stats, noise, pilot_j, window);
      if (done) break;
    }
    for (int p = 0; p < d; ++p)
      if (eta2_raw(p) > 0.0)
        for (auto& l : levels.levels) l(p) *= eta2(p) / eta2_raw(p);
  }
  NoiseTerms sensitivity(lay.grid.n_bins(), lay.freq.j_max, d);
  if (options.noise_uncertainty) {
    const int B = lay.grid.n_bins();
    const double h = lay.grid.width();
    std::vector<Eigen::MatrixXd> at_zero;
    if (options.debias_noise) {
      // diagonal pilot entries are linear in their own noise level
      NoiseTerms silent = noise;
      for (int p = 0; p < d; ++p) silent.scale_component(p, 0.0);
      at_zero = pilot_covolatility_raw(stats, silent, pilot_j, window);
    }
    for (int p = 0; p < d; ++p) {
      const double np = static_cast<double>(obs[p].n());
      double gain = 1.0;
      bool debiased = !at_zero.empty() && eta2(p) > 0.0;
      if (debiased) {
        double b = 0.0;
        for (int m = 0; m < B; ++m) b += h * (at_zero[m](p, p) - pilot[m](p, p)) / eta2(p);
        gain = debiasing_gain(eta2_raw(p), eta2(p), b, obs[p].n());
        debiased = eta2(p) > 0.01 * eta2_raw(p) * (1.0 + 1e-12);
      }
      // the pilot entry of bin k divides the windowed sum of S^2 - N by the windowed gain
      std::vector<double> gsum(B, 0.0), share(B, 0.0);
      for (int m = 1; m <= B; ++m)
        for (int j = 1; j <= pilot_j; ++j) gsum[m - 1] += stats.gain(m, j, p, p);
      if (debiased)
        for (int k = 1; k <= B; ++k) {
          double g = 0.0;
          for (int m = std::max(1, k - window); m <= std::min(B, k + window); ++m) g += gsum[m - 1];
          if (!(g > 1e-12 * pilot_j)) continue;
          for (int m = std::max(1, k - window); m <= std::min(B, k + window); ++m)
            share[m - 1] += h / g;
        }
      // eta2_raw ~ sum S^2 / (2 n |Phi|^2) with |Phi|^2 ~ n G on the sampling points
      for (int k = 1; k <= B; ++k)
        for (int j = 1; j <= lay.freq.j_max; ++j) {
          const double g = stats.gain(k, j, p, p);
          double u = g > 1e-12 ? 1.0 / (2.0 * np * np * g) : 0.0;
          if (j <= pilot_j) u -= share[k - 1] / (2.0 * np);
          sensitivity(k, j, p) = gain * u;
        }
    }
  }
  for (auto& m : pilot) m = project_psd(m);
  MdPreparation prep{lay.grid, lay.freq, std::move(stats), eta2, std::move(noise), std::move(sensitivity),
                     LocalEstimates{std::move(pilot), std::move(levels.levels)}, pilot_j, window};
  return prep;
}

EstimateReport estimate_icv(const ObservationSet& obs, int p, int q, const MdOptions& options) {
  check_pair(p, q, obs.dimension());
  return estimate_icv(prepare_multivariate(obs, options), p, q, options);
}

LmmReport estimate_lmm(const ObservationSet& obs, const MdOptions& options) {
  return estimate_lmm(prepare_multivariate(obs, options), options);
}

EstimateReport estimate_icv(const MdPreparation& prep, int p, int q, const MdOptions& options) {
  check_pair(p, q, prep.stats.dimension());
  WeightTable1D w =
      bivariate_weights(prep.local.sigma, prep.stats, prep.noise, p, q, WeightsMode::adaptive);
  EstimateReport r = spectral_icv(prep.stats, p, q, w, prep.noise);
  if (options.noise_uncertainty && p == q && prep.eta2(p) > 0.0) {
    // the estimate is linear in the S^2 through both its terms and eta2
    const double h = prep.grid.width();
    double var_eta = 0.0;
    for (int k = 1; k <= w.n_bins(); ++k)
      for (int j = 1; j <= w.j_max(); ++j) {
        const double u = prep.sensitivity(k, j, p);
        var_eta += u * u * statistic_square_variance(prep, k, j, p);
      }
    double slope = 0.0, cov = 0.0;
    for (int k = 1; k <= w.n_bins(); ++k) {
      for (int j = 1; j <= w.j_max(); ++j) {
        slope -= h * w.weight(k, j) * prep.noise(k, j, p) / prep.eta2(p);
        cov += h * w.weight(k, j) * prep.sensitivity(k, j, p) * statistic_square_variance(prep, k, j, p);
      }
      r.variance[k - 1] += 2.0 * slope * cov + slope * slope * var_eta;
    }
  }
  r.noise_variance.assign(prep.eta2.data(), prep.eta2.data() + prep.eta2.size());
  MdOptions resolved = options;
  resolved.pilot_frequencies = prep.pilot_frequencies;
  resolved.pilot_window = prep.pilot_window;
  r.config_echo = echo(resolved, prep.grid, prep.freq, prep.eta2, "adaptive");
  return r;
}

LmmReport estimate_lmm(const MdPreparation& prep, const MdOptions& options) {
  LmmReport r = lmm_pass(prep.stats, prep.local.sigma, prep.noise,
                         options.noise_uncertainty ? &prep.sensitivity : nullptr, prep.eta2);
  r.mode = WeightsMode::adaptive;
  r.noise_variance = prep.eta2;
  MdOptions resolved = options;
  resolved.pilot_frequencies = prep.pilot_frequencies;
  resolved.pilot_window = prep.pilot_window;
  r.config_echo = echo(resolved, prep.grid, prep.freq, prep.eta2, "adaptive");
  return r;
}

EstimateReport estimate_icv_oracle(const ObservationSet& obs, int p, int q,
                                   const std::vector<Eigen::MatrixXd>& sigma,
                                   const Eigen::VectorXd& eta2, const MdOptions& options) {
  check_pair(p, q, obs.dimension());
  return estimate_icv_oracle(multivariate_statistics(obs, options), p, q, sigma, eta2, options);
}

LmmReport estimate_lmm_oracle(const ObservationSet& obs, const std::vector<Eigen::MatrixXd>& sigma,
                              const Eigen::VectorXd& eta2, const MdOptions& options) {
  return estimate_lmm_oracle(multivariate_statistics(obs, options), sigma, eta2, options);
}

EstimateReport estimate_icv_oracle(const SpectralArray& stats, int p, int q,
                                   const std::vector<Eigen::MatrixXd>& sigma,
                                   const Eigen::VectorXd& eta2, const MdOptions& options) {
  check_pair(p, q, stats.dimension());
  NoiseTerms noise = empirical_noise_terms(stats, eta2);
  WeightTable1D w = bivariate_weights(sigma, stats, noise, p, q, WeightsMode::oracle);
  EstimateReport r = spectral_icv(stats, p, q, w, noise);
  r.noise_variance.assign(eta2.data(), eta2.data() + eta2.size());
  r.config_echo = echo(options, stats.grid(), FrequencyRange{stats.j_max()}, eta2, "oracle");
  return r;
}

LmmReport estimate_lmm_oracle(const SpectralArray& stats, const std::vector<Eigen::MatrixXd>& sigma,
                              const Eigen::VectorXd& eta2, const MdOptions& options) {
  NoiseTerms noise = empirical_noise_terms(stats, eta2);
  LmmReport r = lmm_estimate(stats, sigma, noise);
  r.mode = WeightsMode::oracle;
  r.noise_variance = eta2;
  r.config_echo = echo(options, stats.grid(), FrequencyRange{stats.j_max()}, eta2, "oracle");
  return r;
}

}  // namespace specvol
