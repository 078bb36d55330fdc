#include "idac/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "idac/errors.hpp"

namespace idac::stats {

namespace {
double central_moment(std::span<const double> x, double m, int k) {
  double acc = 0.0;
  for (double v : x) acc += std::pow(v - m, k);
  return acc / static_cast<double>(x.size());
}

void require_samples(std::span<const double> x, std::size_t n, const char* what) {
  if (x.size() < n) throw InvalidArgument(std::string(what) + ": not enough samples");
}
}  // namespace

double mean(std::span<const double> x) {
  require_samples(x, 1, "mean");
  double acc = 0.0;
  for (double v : x) acc += v;
  return acc / static_cast<double>(x.size());
}

double stddev(std::span<const double> x) { return std::sqrt(central_moment(x, mean(x), 2)); }

double skewness(std::span<const double> x) {
  require_samples(x, 2, "skewness");
  const double m = mean(x);
  const double m2 = central_moment(x, m, 2);
  if (m2 == 0.0) return 0.0;
  return central_moment(x, m, 3) / std::pow(m2, 1.5);
}

double excess_kurtosis(std::span<const double> x) {
  require_samples(x, 2, "excess_kurtosis");
  const double m = mean(x);
  const double m2 = central_moment(x, m, 2);
  if (m2 == 0.0) return 0.0;
  return central_moment(x, m, 4) / (m2 * m2) - 3.0;
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("pearson: length mismatch");
  require_samples(x, 3, "pearson");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  Correlation c;
  if (sxx == 0.0 || syy == 0.0) return c;
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(x.size()) - 2.0;
  if (std::fabs(c.r) >= 1.0) {
    c.p_value = 0.0;
    return c;
  }
  const double t = c.r * std::sqrt(df / (1.0 - c.r * c.r));
  const boost::math::students_t dist(df);
  c.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
  return c;
}

double chi_square_uniform_p(std::span<const double> counts) {
  require_samples(counts, 2, "chi_square_uniform_p");
  double total = 0.0;
  for (double c : counts) total += c;
  const double expected = total / static_cast<double>(counts.size());
  if (expected <= 0.0) throw InvalidArgument("chi_square_uniform_p: no observations");
  double stat = 0.0;
  for (double c : counts) stat += (c - expected) * (c - expected) / expected;
  const boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

}  // namespace idac::stats
