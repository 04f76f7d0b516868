#pragma once

// Sine basis on equidistant bins, empirical scalar products and bin-wise
// spectral statistics of observation increments.
//
// Index conventions: bins k and frequencies j are 1-based (k = 1..n_bins,
// j = 1..j_max) as in the estimator formulas; components p are 0-based.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "specvol/observations.hpp"

namespace specvol {

/// Partition of [0, t_end] into n_bins equal bins [(k-1)h, kh].
///
/// On a regular grid of n observations the bin width is floor(n h)/n so
/// that every bin holds exactly floor(n h) increments; the horizon is then
/// t_end = floor(n h)/(n h) <= 1 and the tail is discarded.
class BinGrid {
 public:
  /// Bins of width 1/n_bins covering [0, 1] (no tie to an observation grid).
  static BinGrid unit(int n_bins);
  /// Bins aligned to the regular grid i/n.
  static BinGrid regular(std::size_t n, int n_bins);

  int n_bins() const { return n_bins_; }
  double width() const { return width_; }
  double t_end() const { return width_ * n_bins_; }
  double left(int k) const { return (k - 1) * width_; }
  double right(int k) const { return k * width_; }
  /// floor(n h) for regular grids, 0 for unit grids.
  std::size_t obs_per_bin() const { return obs_per_bin_; }
  /// Total observation count n of a regular grid, 0 for unit grids.
  std::size_t n() const { return n_; }

  /// 1-based bin containing t under half-open [(k-1)h, kh) attribution;
  /// 0 when t lies outside [0, t_end).
  int bin_of(double t) const;

 private:
  BinGrid(int n_bins, double width, std::size_t n, std::size_t obs_per_bin)
      : n_bins_(n_bins), width_(width), n_(n), obs_per_bin_(obs_per_bin) {}

  int n_bins_;
  double width_;
  std::size_t n_;
  std::size_t obs_per_bin_;
};

/// Frequencies j = 1..j_max used on every bin.
struct FrequencyRange {
  int j_max = 1;

  /// min(cap, floor(n h) - 1); cap <= 0 means no cap. For unit grids the
  /// largest admissible frequency is derived from `n`.
  static FrequencyRange for_grid(const BinGrid& grid, std::size_t n, int cap = 0);
};

/// Phi_jk(t) = sqrt(2/h) sin(j pi (t - (k-1)h)/h) on bin k, zero elsewhere.
double sine_basis_value(int j, int k, const BinGrid& grid, double t);

enum class WeightBasisMode { discrete, continuous };

/// phi_jk(t). Discrete mode: 2n sqrt(2/h) sin(j pi/(2nh)) cos(j pi (t-(k-1)h)/h);
/// continuous mode: the derivative Phi'_jk(t). Both vanish outside bin k.
double weight_basis_value(int j, int k, const BinGrid& grid, std::size_t n, double t,
                          WeightBasisMode mode);

/// [phi_jk, phi_jk]_n = 4 n^2 sin^2(j pi / (2 n h)).
double discrete_weight_norm(int j, std::size_t n, const BinGrid& grid);
/// [phi_jk, phi_jk] = integral of phi_jk^2 = pi^2 j^2 / h^2.
double continuous_weight_norm(int j, const BinGrid& grid);

enum class ScalarProductVariant {
  plain,   ///< <f,g>_n = n^-1 sum_{i=1}^n f(i/n) g(i/n)
  shifted  ///< [f,g]_n = n^-1 sum_{i=1}^n f((i-1/2)/n) g((i-1/2)/n)
};

/// Empirical scalar product of two sequences already sampled on the
/// variant's points (a[i-1] ~ f at the i-th point). Throws on length mismatch.
double empirical_scalar_product(std::span<const double> a, std::span<const double> b);

/// Empirical scalar product of two functions on [0, 1].
double empirical_scalar_product(const std::function<double(double)>& f,
                                const std::function<double(double)>& g, std::size_t n,
                                ScalarProductVariant variant);

/// Where the basis is evaluated for the increment Y_{t_i} - Y_{t_{i-1}}.
enum class EvaluationPoint {
  automatic,  ///< grid point i/n for one-dimensional equidistant data, midpoint otherwise
  grid_point,
  midpoint
};

/// Spectral statistics S_jk^(p) together with the exact noise energy of
/// each statistic,
///   D_jk^(p) = sum_i (Phi_jk(x_{i+1}) - Phi_jk(x_i))^2,
/// x_i the evaluation point of increment i (zero beyond the data), so that
/// an additive white noise of variance eta^2 contributes eta^2 D_jk^(p) to
/// E[S_jk^(p)^2]. On the regular grid D_jk = [phi_jk, phi_jk]_n / n.
///
/// The design gain
///   G_jk^(pq) = sum_{i,i'} Phi_jk(x_i^(p)) Phi_jk(x_i'^(q)) |I_i^(p) cap I_i'^(q)|
/// is the factor with E[S^(p) S^(q)] = Sigma^(pq) G^(pq) + delta_pq eta_p^2 D^(p)
/// for covolatility constant on the bin. It equals 1 on regular grids and
/// drops below 1 at high frequencies for non-synchronous designs.
class SpectralArray {
 public:
  SpectralArray(BinGrid grid, FrequencyRange freq, int d);

  const BinGrid& grid() const { return grid_; }
  const FrequencyRange& freq() const { return freq_; }
  int n_bins() const { return grid_.n_bins(); }
  int j_max() const { return freq_.j_max; }
  int dimension() const { return d_; }

  double operator()(int k, int j, int p) const { return values_[index(k, j, p)]; }
  double& operator()(int k, int j, int p) { return values_[index(k, j, p)]; }
  double noise_energy(int k, int j, int p) const { return energy_[index(k, j, p)]; }
  double& noise_energy(int k, int j, int p) { return energy_[index(k, j, p)]; }
  double gain(int k, int j, int p, int q) const { return gain_[gain_index(k, j, p, q)]; }
  double& gain(int k, int j, int p, int q) { return gain_[gain_index(k, j, p, q)]; }

  /// Increments per component (n_p), recorded for noise-level formulas.
  const std::vector<std::size_t>& increments() const { return increments_; }
  std::vector<std::size_t>& increments() { return increments_; }

 private:
  std::size_t index(int k, int j, int p) const {
    return (static_cast<std::size_t>(k - 1) * freq_.j_max + static_cast<std::size_t>(j - 1)) * d_ +
           static_cast<std::size_t>(p);
  }
  std::size_t gain_index(int k, int j, int p, int q) const {
    return index(k, j, p) * d_ + static_cast<std::size_t>(q);
  }

  BinGrid grid_;
  FrequencyRange freq_;
  int d_;
  std::vector<double> values_;
  std::vector<double> energy_;
  std::vector<double> gain_;
  std::vector<std::size_t> increments_;
};

/// S_jk^(p) = sum_i (Y_{t_i} - Y_{t_{i-1}}) Phi_jk(x_i), x_i = i/n on the
/// regular one-dimensional grid and the midpoint (t_i + t_{i-1})/2
/// otherwise; increments are attributed to the bin holding x_i. Regular
/// grids aligned with the bins use fast sine transforms per bin. Throws
/// ArgumentError for invalid observations or a grid-point request on
/// non-equidistant data.
SpectralArray spectral_statistics(const ObservationSet& obs, const BinGrid& grid,
                                  const FrequencyRange& freq,
                                  EvaluationPoint point = EvaluationPoint::automatic);

}  // namespace specvol
