#include "specvol/observations.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "specvol/errors.hpp"

namespace specvol {

bool ComponentObservations::is_equidistant(double tol) const {
  const std::size_t count = n();
  if (count == 0) return false;
  const double inv_n = 1.0 / static_cast<double>(count);
  for (std::size_t i = 0; i <= count; ++i) {
    if (std::abs(times[i] - static_cast<double>(i) * inv_n) > tol * inv_n) return false;
  }
  return true;
}

void ObservationSet::validate() const {
  if (components.empty()) throw ArgumentError("observation set has no components");
  for (std::size_t p = 0; p < components.size(); ++p) {
    const auto& c = components[p];
    const std::string tag = "component " + std::to_string(p) + ": ";
    if (c.times.size() != c.values.size())
      throw ArgumentError(tag + "times and values differ in length");
    if (c.times.size() < 2) throw ArgumentError(tag + "fewer than 2 observations");
    for (std::size_t i = 0; i < c.times.size(); ++i) {
      if (!std::isfinite(c.times[i]) || !std::isfinite(c.values[i]))
        throw ArgumentError(tag + "non-finite entry at index " + std::to_string(i));
      if (i > 0 && !(c.times[i] > c.times[i - 1]))
        throw ArgumentError(tag + "times not strictly increasing at index " + std::to_string(i));
    }
  }
}

std::size_t ObservationSet::max_n() const {
  std::size_t out = 0;
  for (const auto& c : components) out = std::max(out, c.n());
  return out;
}

std::size_t ObservationSet::min_n() const {
  if (components.empty()) return 0;
  std::size_t out = components.front().n();
  for (const auto& c : components) out = std::min(out, c.n());
  return out;
}

ObservationSet regular_observations(std::vector<double> values) {
  if (values.size() < 2) throw ArgumentError("need at least 2 observations");
  ComponentObservations c;
  const std::size_t n = values.size() - 1;
  c.times.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) c.times[i] = static_cast<double>(i) / static_cast<double>(n);
  c.values = std::move(values);
  return ObservationSet{{std::move(c)}};
}

ObservationSet synchronize_previous_tick(const ObservationSet& obs) {
  obs.validate();
  std::size_t ref = 0;
  for (std::size_t p = 1; p < obs.components.size(); ++p)
    if (obs.components[p].n() < obs.components[ref].n()) ref = p;
  const auto& ref_times = obs.components[ref].times;

  ObservationSet out;
  out.components.reserve(obs.components.size());
  for (const auto& c : obs.components) {
    ComponentObservations s;
    s.times = ref_times;
    s.values.resize(ref_times.size());
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < ref_times.size(); ++i) {
      while (cursor + 1 < c.times.size() && c.times[cursor + 1] <= ref_times[i]) ++cursor;
      s.values[i] = c.values[cursor];
    }
    out.components.push_back(std::move(s));
  }
  return out;
}

}  // namespace specvol
