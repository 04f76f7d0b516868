#pragma once

// Multivariate spectral estimation from non-synchronous noisy observations:
// local noise levels, pilot spot covolatility, the bivariate covolatility
// estimator and the local method of moments (LMM).

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "specvol/basis.hpp"
#include "specvol/estimators_1d.hpp"
#include "specvol/observations.hpp"

namespace specvol {

/// How the noise contribution N_jk^(p) to E[S_jk^(p)^2] is formed.
enum class NoiseNorm {
  empirical,  ///< eta_p^2 D_jk^(p), the exact noise energy of the statistic
  continuous  ///< H_k^(p) pi^2 j^2 / h^2 with the estimated local noise level
};

const char* to_string(NoiseNorm norm);

/// Noise contributions N_jk^(p) indexed like SpectralArray (k, j 1-based).
class NoiseTerms {
 public:
  NoiseTerms(int n_bins, int j_max, int d);
  int n_bins() const { return n_bins_; }
  int j_max() const { return j_max_; }
  int dimension() const { return d_; }
  double operator()(int k, int j, int p) const { return values_[index(k, j, p)]; }
  double& operator()(int k, int j, int p) { return values_[index(k, j, p)]; }
  /// diag(N_jk^(1), ..., N_jk^(d)).
  Eigen::VectorXd at(int k, int j) const;
  /// Multiplies every entry of component p by factor.
  void scale_component(int p, double factor);

 private:
  std::size_t index(int k, int j, int p) const {
    return (static_cast<std::size_t>(k - 1) * j_max_ + static_cast<std::size_t>(j - 1)) * d_ +
           static_cast<std::size_t>(p);
  }
  int n_bins_, j_max_, d_;
  std::vector<double> values_;
};

/// Per-bin pilot covolatility and local noise level matrices.
struct LocalEstimates {
  std::vector<Eigen::MatrixXd> sigma;        ///< Sigma_hat_k, symmetric PSD
  std::vector<Eigen::VectorXd> noise_level;  ///< diagonal of H_hat_k
};

struct NoiseLevelEstimate {
  std::vector<Eigen::VectorXd> levels;  ///< diagonal of H_hat_k per bin
  std::vector<std::pair<int, int>> borrowed;  ///< (bin, component) filled from a neighbour
};

/// eta_hat_p^2 = (2 n_p)^{-1} sum_i (Delta_i Y^(p))^2 for every component.
Eigen::VectorXd estimate_noise_variances(const ObservationSet& obs);

/// H_hat_p^k = (sum_i (Delta_i Y^(p))^2 / (2 n_p h)) sum_{bin k} (t_v - t_{v-1})^2,
/// increments attributed to bins by midpoint. Bins with fewer than two
/// observations of a component borrow the nearest populated bin's value.
NoiseLevelEstimate estimate_local_noise_levels(const ObservationSet& obs, const BinGrid& grid);

NoiseTerms empirical_noise_terms(const SpectralArray& stats, const Eigen::VectorXd& eta2);
NoiseTerms continuous_noise_terms(const std::vector<Eigen::VectorXd>& levels, const BinGrid& grid,
                                  const FrequencyRange& freq);

/// Symmetrise and clip eigenvalues at max(1e-8 trace/d, 1e-12).
Eigen::MatrixXd project_psd(const Eigen::MatrixXd& a);

/// Over bins m = max(1,k-K)..min(n_bins,k+K) and frequencies j <= J,
/// sum (S_jm S_jm^T - diag(N_jm)) divided entrywise by sum G_jm, before
/// projection. With unit gains this is the plain average.
std::vector<Eigen::MatrixXd> pilot_covolatility_raw(const SpectralArray& stats,
                                                    const NoiseTerms& noise, int pilot_frequencies,
                                                    int window);
std::vector<Eigen::MatrixXd> pilot_covolatility(const SpectralArray& stats, const NoiseTerms& noise,
                                                int pilot_frequencies, int window);

/// 1/Var(S^(p) S^(q)) for Gaussian statistics with covariance
/// Sigma + diag(noise):
///   ((S_pp + N_p)(S_qq + N_q) + (S_pq + delta_pq N_p)^2)^{-1}.
double bivariate_fisher_info(const Eigen::MatrixXd& sigma, double noise_p, double noise_q, int p,
                             int q);
/// Same with N = H [phi_jk, phi_jk], [phi_jk, phi_jk] = pi^2 j^2 / h^2.
double bivariate_fisher_info(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& noise_level,
                             int p, int q, int j, const BinGrid& grid);

/// Weights w_jk = I_jk / I_k for unit design gains.
WeightTable1D bivariate_weights(const std::vector<Eigen::MatrixXd>& sigma, const NoiseTerms& noise,
                                int p, int q, WeightsMode mode = WeightsMode::adaptive);
/// Generalised least squares weights under the design gains of `stats`:
/// with V_jk = Var(S^(p) S^(q)) under covariance Sigma o G + diag(N),
/// info I_jk = G_pq^2 / V_jk and weight w_jk = (G_pq / V_jk) / I_k. Equal
/// to the plain weights when G = 1.
WeightTable1D bivariate_weights(const std::vector<Eigen::MatrixXd>& sigma, const SpectralArray& stats,
                                const NoiseTerms& noise, int p, int q,
                                WeightsMode mode = WeightsMode::adaptive);

/// ICV_{n,t}^{(p,q)} = sum_k h sum_j w_jk (S^(p) S^(q) - delta_pq N^(p)) with
/// variance sum_k h^2 / I_k.
EstimateReport spectral_icv(const SpectralArray& stats, int p, int q, const WeightTable1D& weights,
                            const NoiseTerms& noise);

/// Fisher-information weight matrices W_jk = I_k^{-1} I_jk,
/// I_jk = (Sigma_k + diag(N_jk))^{-(x)2}.
struct LmmWeightTable {
  std::vector<std::vector<Eigen::MatrixXd>> weights;  ///< [bin][j-1], d^2 x d^2
  std::vector<Eigen::MatrixXd> total_info;            ///< I_k per bin
  std::size_t regularized = 0;  ///< (k, j) pairs where E_d 1e-10 was added
};

LmmWeightTable lmm_weight_matrices(const std::vector<Eigen::MatrixXd>& sigma,
                                   const NoiseTerms& noise);
/// Gain-aware table: with C = Sigma o G + diag(N), A = C^{-1} and
/// D = diag(vec G), I_k = sum_j D (A (x) A) D and W_jk = I_k^{-1} D (A (x) A).
LmmWeightTable lmm_weight_matrices(const SpectralArray& stats,
                                   const std::vector<Eigen::MatrixXd>& sigma,
                                   const NoiseTerms& noise);

/// Vector-valued LMM estimate path with its covariance estimate.
struct LmmReport {
  int d = 0;
  WeightsMode mode = WeightsMode::adaptive;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> estimate;    ///< cumulative vec estimate
  std::vector<Eigen::MatrixXd> covariance;  ///< cumulative I_hat^{-1} = sum h^2 I_k^{-1}
  Eigen::VectorXd noise_variance;
  std::size_t regularized = 0;
  std::string config_echo;

  const Eigen::VectorXd& final_estimate() const { return estimate.back(); }
  const Eigen::MatrixXd& final_covariance() const { return covariance.back(); }
  Eigen::MatrixXd final_matrix() const;
  /// I_hat^{1/2} (LMM - vec(truth)), asymptotically N(0, Z).
  Eigen::VectorXd studentize(const Eigen::MatrixXd& truth) const;
  /// Variance of entry (p, q) of the matrix estimate: (I_hat^{-1} Z)_{ii}.
  double entry_variance(int p, int q) const;
};

/// LMM_{n,t} = sum_k h I_k^{-1} sum_j D_jk vec(A_jk (S S^T - N_jk) A_jk),
/// A_jk = (Sigma_k o G_jk + N_jk)^{-1}, the vec-identity form of
/// sum_j W_jk vec(S S^T - N_jk) with the gain-aware table.
LmmReport lmm_estimate(const SpectralArray& stats, const std::vector<Eigen::MatrixXd>& sigma,
                       const NoiseTerms& noise);
/// Same estimator applied through an explicit weight table.
LmmReport lmm_estimate(const SpectralArray& stats, const LmmWeightTable& table,
                       const NoiseTerms& noise);

struct MdOptions {
  int h_inv = 0;          ///< 0 selects default_bin_count(min_l n_l)
  int max_frequency = 0;  ///< 0 uses all floor(n_min h) - 1 frequencies
  int pilot_frequencies = 100;
  int pilot_window = -1;  ///< < 0 selects default_pilot_window(n_min)
  NoiseNorm norm = NoiseNorm::empirical;
  bool debias_noise = true;
  bool noise_uncertainty = true;  ///< propagate the error of the estimated eta^2 into the variance
};

/// Spectral statistics, noise variances, noise terms and pilots of the
/// adaptive multivariate pipeline.
struct MdPreparation {
  BinGrid grid;
  FrequencyRange freq;
  SpectralArray stats;
  Eigen::VectorXd eta2;
  NoiseTerms noise;
  /// d eta2(p) / d (S_jk^(p))^2 at entry (k, j, p); zero unless noise_uncertainty
  NoiseTerms sensitivity;
  LocalEstimates local;
  int pilot_frequencies = 0;
  int pilot_window = 0;
};

/// Midpoint spectral statistics on the unit grid selected by `options`.
SpectralArray multivariate_statistics(const ObservationSet& obs, const MdOptions& options = {});
MdPreparation prepare_multivariate(const ObservationSet& obs, const MdOptions& options = {});

EstimateReport estimate_icv(const ObservationSet& obs, int p, int q, const MdOptions& options = {});
LmmReport estimate_lmm(const ObservationSet& obs, const MdOptions& options = {});
/// Same from a finished preparation, so several estimators share one pass.
EstimateReport estimate_icv(const MdPreparation& prep, int p, int q, const MdOptions& options = {});
LmmReport estimate_lmm(const MdPreparation& prep, const MdOptions& options = {});

/// Oracle versions from the true Sigma at the bin left edges and true eta.
EstimateReport estimate_icv_oracle(const ObservationSet& obs, int p, int q,
                                   const std::vector<Eigen::MatrixXd>& sigma,
                                   const Eigen::VectorXd& eta2, const MdOptions& options = {});
LmmReport estimate_lmm_oracle(const ObservationSet& obs, const std::vector<Eigen::MatrixXd>& sigma,
                              const Eigen::VectorXd& eta2, const MdOptions& options = {});
EstimateReport estimate_icv_oracle(const SpectralArray& stats, int p, int q,
                                   const std::vector<Eigen::MatrixXd>& sigma,
                                   const Eigen::VectorXd& eta2, const MdOptions& options = {});
LmmReport estimate_lmm_oracle(const SpectralArray& stats, const std::vector<Eigen::MatrixXd>& sigma,
                              const Eigen::VectorXd& eta2, const MdOptions& options = {});

}  // namespace specvol
