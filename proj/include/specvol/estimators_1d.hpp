#pragma once

// One-dimensional spectral estimation of integrated volatility from
// regularly observed noisy data: noise variance, pilot spot volatility,
// Fisher-information weights, the bin-wise weighted estimator and its
// variance estimate.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "specvol/basis.hpp"
#include "specvol/observations.hpp"

namespace specvol {

enum class WeightsMode { oracle, adaptive };

const char* to_string(WeightsMode mode);

/// Weights w_jk = I_jk / I_k with I_jk = 1/Var(S_jk^2) for Gaussian
/// statistics, I_jk = (2 (sigma_k^2 + eta^2 [phi_jk,phi_jk]_n / n)^2)^{-1}.
class WeightTable1D {
 public:
  WeightTable1D(int n_bins, int j_max, WeightsMode mode);

  int n_bins() const { return n_bins_; }
  int j_max() const { return j_max_; }
  WeightsMode mode() const { return mode_; }

  double weight(int k, int j) const { return weights_[index(k, j)]; }
  double info(int k, int j) const { return info_[index(k, j)]; }
  double total_info(int k) const { return total_[k - 1]; }

  double& weight(int k, int j) { return weights_[index(k, j)]; }
  double& info(int k, int j) { return info_[index(k, j)]; }
  double& total_info(int k) { return total_[k - 1]; }

 private:
  std::size_t index(int k, int j) const {
    return static_cast<std::size_t>(k - 1) * j_max_ + static_cast<std::size_t>(j - 1);
  }
  int n_bins_;
  int j_max_;
  WeightsMode mode_;
  std::vector<double> weights_;
  std::vector<double> info_;
  std::vector<double> total_;
};

/// Scalar estimate path on the bin edges t = k h with its variance estimate.
struct EstimateReport {
  std::string estimator;           ///< "iv", "icv(p,q)", ...
  WeightsMode mode = WeightsMode::adaptive;
  std::vector<double> times;       ///< k h, k = 1..n_bins
  std::vector<double> estimate;    ///< cumulative estimate at each time
  std::vector<double> variance;    ///< cumulative variance estimate
  std::vector<double> local;       ///< bin-wise spot estimates
  std::vector<double> noise_variance;  ///< eta^2 per component used for bias correction
  double ci_level = 0.95;
  std::string config_echo;         ///< JSON text of the settings

  double final_estimate() const { return estimate.back(); }
  double final_variance() const { return variance.back(); }
};

/// eta_hat^2 = (2n)^{-1} sum_i (Delta_i Y)^2.
double estimate_noise_variance(const ComponentObservations& obs);

/// eta_hat^2 - iv/(2n), floored at 1% of eta_hat^2: removes the signal
/// contribution iv/(2n) from the raw noise variance estimate.
double debias_noise_variance(double eta2_raw, double integrated_variance, std::size_t n);

/// d eta2 / d eta2_raw at the debiasing fixed point, where the pilot
/// integrated variance falls by `slope` per unit of eta2; 0.01 on the floor.
double debiasing_gain(double eta2_raw, double eta2, double slope, std::size_t n);

/// K_n = round(n^{1/4} / 2), so 2 K_n + 1 ~ n^{1/4}.
int default_pilot_window(std::size_t n);

/// Bin count from h ~ n^{-1/2} log n, scaled so that n = 30000 gives 25.
int default_bin_count(std::size_t n);

/// Bin-wise pilot sigma^2 before flooring: average over the bins
/// max(1, k-K)..min(n_bins, k+K) of J^{-1} sum_{j<=J} (S_jm^2 - [phi_jm,phi_jm]_n eta^2/n).
std::vector<double> pilot_spot_volatility_raw(const SpectralArray& stats, int pilot_frequencies,
                                              int window, double eta2);

/// Floors at max(1e-8, 0.05 * median).
std::vector<double> floor_pilot(std::vector<double> pilot);

std::vector<double> pilot_spot_volatility(const SpectralArray& stats, int pilot_frequencies,
                                          int window, double eta2);

/// Oracle-form weights for given bin-wise sigma^2 (all > 0) and eta^2.
WeightTable1D optimal_weights_1d(std::span<const double> sigma2, double eta2, std::size_t n,
                                 const BinGrid& grid, const FrequencyRange& freq,
                                 WeightsMode mode = WeightsMode::oracle);

/// IV_{n,t} = sum_k h sum_j w_jk (S_jk^2 - eta^2/n [phi_jk,phi_jk]_n) and
/// V_{n,t} = sum_k h^2 / I_k along t = k h.
EstimateReport spectral_iv(const SpectralArray& stats, const WeightTable1D& weights, double eta2);

/// IV +- z_{(1+level)/2} sqrt(V) at the final time.
std::pair<double, double> confidence_interval(const EstimateReport& report, double level);
/// Same at time index `i` of the path.
std::pair<double, double> confidence_interval(const EstimateReport& report, double level,
                                              std::size_t i);

struct Iv1dOptions {
  int h_inv = 0;              ///< 0 selects default_bin_count(n)
  int max_frequency = 0;      ///< 0 uses all floor(n h) - 1 frequencies
  int pilot_frequencies = 100;
  int pilot_window = -1;      ///< < 0 selects default_pilot_window(n)
  bool debias_noise = true;
  bool noise_uncertainty = true;  ///< propagate the error of the estimated eta^2 into the variance
};

/// Two-stage estimator: noise variance, pilot, estimated weights, final pass.
EstimateReport estimate_iv_adaptive(const ObservationSet& obs, const Iv1dOptions& options = {});

/// Oracle estimator from the true spot variances at the bin left edges and
/// the true noise variance.
EstimateReport estimate_iv_oracle(const ObservationSet& obs, std::span<const double> sigma2,
                                  double eta2, const Iv1dOptions& options = {});

}  // namespace specvol
