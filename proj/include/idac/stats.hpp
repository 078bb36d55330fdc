#pragma once

// Sample statistics for the diagnostics and the statistical tests.

#include <span>

namespace idac::stats {

double mean(std::span<const double> x);
/// Population (ddof = 0) standard deviation.
double stddev(std::span<const double> x);
/// Biased moment estimators m3 / m2^1.5 and m4 / m2^2 - 3.
double skewness(std::span<const double> x);
double excess_kurtosis(std::span<const double> x);

struct Correlation {
  double r = 0.0;
  double p_value = 1.0;  // two-sided, t test with n - 2 degrees of freedom
};
Correlation pearson(std::span<const double> x, std::span<const double> y);

/// Pearson chi-square goodness of fit of `counts` against equal expected
/// frequencies; returns the upper-tail p-value.
double chi_square_uniform_p(std::span<const double> counts);

/// Standard normal upper quantile, e.g. z(0.975) = 1.96.
double normal_quantile(double p);

}  // namespace idac::stats
