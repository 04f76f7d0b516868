#include "specvol/stats.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>

#include "specvol/errors.hpp"

namespace specvol {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("normal quantile needs 0 < p < 1");
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, p);
}

std::pair<double, double> wilson_interval(std::size_t successes, std::size_t trials,
                                          double level) {
  if (trials == 0) throw ArgumentError("wilson interval needs trials > 0");
  const double z = normal_quantile(0.5 * (1.0 + level));
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double denom = 1.0 + z * z / n;
  const double centre = (p + z * z / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
  return {centre - half, centre + half};
}

}  // namespace specvol
