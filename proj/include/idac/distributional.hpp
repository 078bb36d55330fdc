#pragma once

// Comparison of empirical return distributions: sorting, 1-D Wasserstein,
// quantile-regression Huber loss and the twin sorted-minimum target.

#include <span>
#include <vector>

#include "idac/autodiff.hpp"

namespace idac::dist {

struct QuantileConfig {
  int num_quantiles = 51;  // K
  double kappa = 1.0;      // Huber threshold, reward units

  /// tau_k = (k - 0.5) / K for k = 1..K.
  std::vector<double> taus() const;
  void validate() const;
};

/// K return samples. `sorted` records that values are non-decreasing.
struct SampleVec {
  std::vector<double> values;
  bool sorted = false;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

/// Stable ascending sort. Throws InvalidArgument on non-finite entries.
SampleVec sort_samples(std::span<const double> x);

/// ((1/K) sum_k |sort(x)_k - sort(y)_k|^p)^(1/p).
double empirical_wasserstein(std::span<const double> x, std::span<const double> y, double p = 1.0);

/// |tau - 1[u<0]| * L_kappa(u) / kappa.
double huber_rho(double u, double tau, double kappa);
/// d huber_rho / du.
double huber_rho_grad(double u, double tau, double kappa);

/// (1/K^2) sum_k sum_k' rho_{tau_k}(y_k' - x_k), x already sorted.
double quantile_huber_loss(std::span<const double> x_sorted, std::span<const double> y_target,
                           const QuantileConfig& cfg);

/// Batched form: rows are independent (x_sorted, y) pairs of length K, the
/// result is the mean of the per-row losses. Gradient flows into x only; y
/// enters as a constant.
ad::Tensor quantile_huber_loss(const ad::Tensor& x_sorted, const Matrix& y_target, double kappa);

/// Sort each input, then take the element-wise minimum (itself sorted).
SampleVec twin_min_targets(std::span<const double> y1, std::span<const double> y2);

/// Row-wise versions on B x K matrices.
Matrix sort_rows(const Matrix& x);
Matrix twin_min_targets(const Matrix& y1, const Matrix& y2);

}  // namespace idac::dist
