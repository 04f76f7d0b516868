#pragma once

#include <utility>

namespace specvol {

/// Standard normal quantile Phi^{-1}(p), 0 < p < 1.
double normal_quantile(double p);

/// Wilson score interval for a binomial proportion successes/trials at the
/// given two-sided confidence level.
std::pair<double, double> wilson_interval(std::size_t successes, std::size_t trials,
                                          double level = 0.95);

}  // namespace specvol
