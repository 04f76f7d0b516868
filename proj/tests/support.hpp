#pragma once

// Independent reference computations shared by the unit tests.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "specvol/basis.hpp"
#include "specvol/observations.hpp"

namespace specvol::testing {

inline constexpr double kPi = std::numbers::pi;

// Brownian motion with volatility sigma plus gaussian noise on i/n.
inline ObservationSet noisy_bm(std::size_t n, double sigma, double eta, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  std::vector<double> y(n + 1);
  double x = 0.0;
  const double sd = sigma / std::sqrt(static_cast<double>(n));
  for (std::size_t i = 0; i <= n; ++i) {
    if (i > 0) x += sd * z(rng);
    y[i] = x + eta * z(rng);
  }
  return regular_observations(std::move(y));
}

// Direct sum S = sum_i (Y_i - Y_{i-1}) Phi_jk(x_i) with std::sin, the
// evaluation point x_i being i/n or the midpoint.
inline double brute_statistic(const ComponentObservations& c, const BinGrid& grid, int k, int j,
                              bool midpoint) {
  double s = 0.0;
  const std::size_t n = c.n();
  for (std::size_t i = 1; i <= n; ++i) {
    const double x = midpoint ? 0.5 * (c.times[i] + c.times[i - 1])
                              : static_cast<double>(i) / static_cast<double>(n);
    if (grid.bin_of(x) != k) continue;
    s += (c.values[i] - c.values[i - 1]) * sine_basis_value(j, k, grid, x);
  }
  return s;
}

// Basis values at the evaluation points of the increments in bin k.
inline std::vector<double> bin_basis(const ComponentObservations& c, const BinGrid& grid, int k,
                                     int j, std::vector<std::size_t>* index = nullptr) {
  std::vector<double> out;
  for (std::size_t i = 1; i <= c.n(); ++i) {
    const double x = 0.5 * (c.times[i] + c.times[i - 1]);
    if (grid.bin_of(x) != k) continue;
    out.push_back(sine_basis_value(j, k, grid, x));
    if (index) index->push_back(i);
  }
  return out;
}

// Noise energy sum (Phi(x_{i+1}) - Phi(x_i))^2 over the increments of bin k
// at midpoints, zero beyond the bin.
inline double brute_energy(const ComponentObservations& c, const BinGrid& grid, int k, int j) {
  const auto v = bin_basis(c, grid, k, j);
  if (v.empty()) return 0.0;
  double e = v.front() * v.front() + v.back() * v.back();
  for (std::size_t u = 1; u < v.size(); ++u) e += (v[u] - v[u - 1]) * (v[u] - v[u - 1]);
  return e;
}

// Design gain by explicit double loop over increment pairs.
inline double brute_gain(const ComponentObservations& a, const ComponentObservations& b,
                         const BinGrid& grid, int k, int j) {
  double g = 0.0;
  for (std::size_t i = 1; i <= a.n(); ++i) {
    const double xa = 0.5 * (a.times[i] + a.times[i - 1]);
    if (grid.bin_of(xa) != k) continue;
    for (std::size_t v = 1; v <= b.n(); ++v) {
      const double xb = 0.5 * (b.times[v] + b.times[v - 1]);
      if (grid.bin_of(xb) != k) continue;
      const double overlap =
          std::min(a.times[i], b.times[v]) - std::max(a.times[i - 1], b.times[v - 1]);
      if (overlap <= 0.0) continue;
      g += overlap * sine_basis_value(j, k, grid, xa) * sine_basis_value(j, k, grid, xb);
    }
  }
  return g;
}

// Sorted uniform times with t_0 = 0 and t_n = 1.
inline std::vector<double> random_times(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> t(n + 1);
  t[0] = 0.0;
  t[n] = 1.0;
  for (std::size_t i = 1; i < n; ++i) t[i] = u(rng);
  std::sort(t.begin() + 1, t.end() - 1);
  return t;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_sd(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace specvol::testing
