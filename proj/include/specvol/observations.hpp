#pragma once

#include <cstddef>
#include <vector>

namespace specvol {

/// Observation times and noisy values of one component. Times are sorted
/// strictly increasing; there are n() increments and n()+1 points.
struct ComponentObservations {
  std::vector<double> times;
  std::vector<double> values;

  std::size_t n() const { return times.empty() ? 0 : times.size() - 1; }

  /// True when times[i] == i/n up to rounding, i.e. the regular grid of
  /// the one-dimensional model.
  bool is_equidistant(double tol = 1e-9) const;
};

struct ObservationSet {
  std::vector<ComponentObservations> components;

  int dimension() const { return static_cast<int>(components.size()); }
  const ComponentObservations& operator[](int p) const { return components[p]; }

  /// Throws ArgumentError unless every component has >= 2 points, sorted
  /// strictly increasing times and finite values.
  void validate() const;

  std::size_t max_n() const;
  std::size_t min_n() const;
};

/// Observation set on the regular grid i/n, i = 0..n, from a value vector
/// of length n+1.
ObservationSet regular_observations(std::vector<double> values);

/// Previous-tick synchronisation onto the sampling times of the coarsest
/// component (fewest observations). Each other component takes its last
/// value observed at or before every reference time.
ObservationSet synchronize_previous_tick(const ObservationSet& obs);

}  // namespace specvol
