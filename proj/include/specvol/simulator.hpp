#pragma once

// Ground-truth paths, non-synchronous sampling and additive noise.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "specvol/observations.hpp"

namespace specvol {

/// Observation-time design t_i = F^{-1}(i/n) on [0, 1].
struct SamplingScheme {
  enum class Kind {
    identity,  ///< F(x) = x, equidistant times
    power,     ///< F(x) = x^a, a = parameter > 0
    sine,      ///< F^{-1}(u) = u + c sin(2 pi u)/(2 pi), |c| < 1, c = parameter
    poisson    ///< order statistics of uniforms, independent of the signal
  };
  Kind kind = Kind::identity;
  double parameter = 0.0;

  double quantile(double u) const;
  /// (F^{-1})'(u).
  double quantile_derivative(double u) const;
  /// F'(t).
  double cdf_derivative(double t) const;
  bool is_random() const { return kind == Kind::poisson; }
  void validate() const;
};

enum class NoiseDistribution { gaussian, uniform, two_point };

struct NoiseConfig {
  std::vector<double> eta;  ///< noise standard deviation per component
  NoiseDistribution distribution = NoiseDistribution::gaussian;
};

/// f(t) = 0.1 (1 - t^{1/3} + 0.5 t^2), U-shaped intraday seasonality.
double seasonality(double t);

struct VolatilityModel {
  enum class Kind {
    constant,            ///< Sigma_s = covolatility
    stoch_vol_seasonal,  ///< sigma_t^2 = (1 + sigma_tilde B_t) f(t), Sigma = sigma_t^2 R
    grid                 ///< Sigma_s piecewise linear through grid_times / grid_values
  };
  Kind kind = Kind::constant;
  Eigen::MatrixXd covolatility;  ///< constant model (d x d, PSD)
  double sigma_tilde = 0.01;     ///< vol-of-vol scale of the stochastic factor
  double leverage = 0.0;         ///< correlation of B with the first signal BM
  Eigen::MatrixXd correlation;   ///< stoch_vol_seasonal base matrix R (default identity)
  std::vector<double> grid_times;
  std::vector<Eigen::MatrixXd> grid_values;
};

struct ScenarioConfig {
  std::size_t n = 30000;                   ///< reference observation count
  std::vector<std::size_t> n_per_component;  ///< n_l; empty means n for all
  int d = 1;
  int h_inv = 25;
  std::vector<double> drift;  ///< b per component (size 1 broadcasts)
  VolatilityModel volatility;
  NoiseConfig noise;
  std::vector<SamplingScheme> sampling;  ///< size 1 broadcasts
  std::uint64_t seed = 1;
  std::size_t fine_grid_steps = 0;  ///< 0 selects 10 max_l n_l

  std::size_t n_component(int l) const;
  /// nu_l = n / n_l.
  double nu(int l) const;
  double eta(int l) const;
  double drift_of(int l) const;
  const SamplingScheme& scheme(int l) const;
  std::size_t resolved_fine_steps() const;
  /// Throws ConfigError on inconsistent settings.
  void validate() const;

  /// Constant scalar volatility, one component, equidistant sampling.
  static ScenarioConfig constant_1d(std::size_t n, double sigma, double eta, int h_inv,
                                    double drift = 0.0);
  /// Stochastic seasonal volatility with leverage, one component.
  static ScenarioConfig stoch_vol_1d(std::size_t n, double eta, double leverage, int h_inv,
                                     double drift = 0.1, double sigma_tilde = 0.01);
};

/// Spot covolatility on the fine grid plus the Brownian increments that
/// drove it. Kept separately so a volatility realisation can be frozen while
/// fresh signal randomness is drawn.
struct VolatilityPath {
  std::vector<double> times;            ///< fine grid 0 = s_0 < ... < s_N = 1
  std::vector<Eigen::MatrixXd> spot;    ///< Sigma at each grid point
  std::vector<double> driver;           ///< increments of B (stoch_vol_seasonal only)
  double leverage = 0.0;
  std::size_t clamp_count = 0;          ///< steps where sigma^2 was floored

  std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
  int dimension() const { return spot.empty() ? 0 : static_cast<int>(spot.front().rows()); }
  /// Spot covolatility at the grid point nearest to t.
  const Eigen::MatrixXd& at(double t) const;
};

struct PathBundle {
  VolatilityPath volatility;
  Eigen::MatrixXd signal;  ///< d x (N+1), X at the fine grid points

  const std::vector<double>& times() const { return volatility.times; }
  int dimension() const { return static_cast<int>(signal.rows()); }
};

using Rng = std::mt19937_64;

/// SplitMix64 step; used to derive independent seed streams.
std::uint64_t splitmix64(std::uint64_t x);
/// Seed of replication `rep` under master seed `master` (stream 0 is
/// reserved for the frozen volatility path).
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream);

VolatilityPath simulate_volatility(const ScenarioConfig& config, Rng& rng);
/// How the first signal BM relates to the stored volatility driver B.
enum class LeverageCoupling {
  conditional,  ///< W = lambda B + sqrt(1 - lambda^2) B', B' fresh
  independent   ///< W fresh, ignoring B
};

const char* to_string(LeverageCoupling coupling);

/// Euler-Maruyama signal given a volatility path. For leverage models the
/// first signal BM follows `coupling`; with a frozen volatility path the
/// conditional coupling adds a path-specific drift lambda dB to every
/// replication.
Eigen::MatrixXd simulate_signal(const ScenarioConfig& config, const VolatilityPath& vol, Rng& rng,
                                LeverageCoupling coupling = LeverageCoupling::conditional);
PathBundle simulate_paths(const ScenarioConfig& config, Rng& rng);
PathBundle simulate_paths(const ScenarioConfig& config);

/// Sampling times t_i^(l), i = 0..n_l, with t_0 = 0 and t_{n_l} = 1.
std::vector<double> sampling_times(const ScenarioConfig& config, int l, Rng& rng);

/// Y_i^(l) = X^(l)_{t_i} + eps_i^(l), X looked up at the nearest fine-grid point.
ObservationSet sample_noisy_observations(const PathBundle& paths, const ScenarioConfig& config,
                                         Rng& rng);

/// Trapezoidal integral of Sigma_s over [0, t] on the fine grid.
Eigen::MatrixXd true_integrated_covolatility(const VolatilityPath& vol, double t);
Eigen::MatrixXd true_integrated_covolatility(const PathBundle& paths, double t);

/// Spot variance of component p at the left edges (k-1) h of the bins.
std::vector<double> spot_variance_at_bin_edges(const VolatilityPath& vol, double bin_width,
                                               int n_bins, int p = 0);

}  // namespace specvol
