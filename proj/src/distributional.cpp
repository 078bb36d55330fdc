#include "idac/distributional.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "idac/errors.hpp"

namespace idac::dist {

std::vector<double> QuantileConfig::taus() const {
  validate();
  std::vector<double> t(static_cast<std::size_t>(num_quantiles));
  for (int k = 0; k < num_quantiles; ++k) t[k] = (k + 0.5) / num_quantiles;
  return t;
}

void QuantileConfig::validate() const {
  if (num_quantiles < 1) throw InvalidArgument("quantile count K must be positive");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw InvalidArgument("Huber threshold kappa must be positive");
}

SampleVec sort_samples(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) throw InvalidArgument("sort_samples: non-finite sample");
  }
  SampleVec out{{x.begin(), x.end()}, true};
  std::stable_sort(out.values.begin(), out.values.end());
  return out;
}

double empirical_wasserstein(std::span<const double> x, std::span<const double> y, double p) {
  if (x.size() != y.size()) throw InvalidArgument("empirical_wasserstein: sample counts differ");
  if (x.empty()) throw InvalidArgument("empirical_wasserstein: empty samples");
  if (!(p >= 1.0)) throw InvalidArgument("empirical_wasserstein: order p must be >= 1");
  const SampleVec xs = sort_samples(x);
  const SampleVec ys = sort_samples(y);
  double acc = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) acc += std::pow(std::abs(xs[k] - ys[k]), p);
  return std::pow(acc / static_cast<double>(xs.size()), 1.0 / p);
}

double huber_rho(double u, double tau, double kappa) {
  const double a = std::abs(u);
  const double l = a <= kappa ? 0.5 * u * u : kappa * (a - 0.5 * kappa);
  return std::abs(tau - (u < 0.0 ? 1.0 : 0.0)) * l / kappa;
}

double huber_rho_grad(double u, double tau, double kappa) {
  const double dl = std::abs(u) <= kappa ? u : (u > 0.0 ? kappa : -kappa);
  return std::abs(tau - (u < 0.0 ? 1.0 : 0.0)) * dl / kappa;
}

double quantile_huber_loss(std::span<const double> x_sorted, std::span<const double> y_target,
                           const QuantileConfig& cfg) {
  if (x_sorted.size() != y_target.size()) throw InvalidArgument("quantile_huber_loss: sample counts differ");
  if (x_sorted.size() != static_cast<std::size_t>(cfg.num_quantiles)) {
    throw InvalidArgument("quantile_huber_loss: sample count differs from K");
  }
  const std::vector<double> taus = cfg.taus();
  const std::size_t k_count = x_sorted.size();
  double acc = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    for (std::size_t kp = 0; kp < k_count; ++kp) acc += huber_rho(y_target[kp] - x_sorted[k], taus[k], cfg.kappa);
  }
  return acc / static_cast<double>(k_count * k_count);
}

ad::Tensor quantile_huber_loss(const ad::Tensor& x_sorted, const Matrix& y_target, double kappa) {
  const Matrix& x = x_sorted.value();
  if (x.rows() != y_target.rows() || x.cols() != y_target.cols()) {
    throw InvalidArgument("quantile_huber_loss: x is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                          ", targets are " + std::to_string(y_target.rows()) + "x" +
                          std::to_string(y_target.cols()));
  }
  QuantileConfig{static_cast<int>(x.cols()), kappa}.validate();
  const Index rows = x.rows();
  const Index k_count = x.cols();
  const double norm = 1.0 / (static_cast<double>(rows) * static_cast<double>(k_count * k_count));

  auto grad = std::make_shared<Matrix>(rows, k_count);
  double acc = 0.0;
  for (Index i = 0; i < rows; ++i) {
    for (Index k = 0; k < k_count; ++k) {
      const double tau = (k + 0.5) / static_cast<double>(k_count);
      const double xk = x(i, k);
      double g = 0.0;
      for (Index kp = 0; kp < k_count; ++kp) {
        const double u = y_target(i, kp) - xk;
        acc += huber_rho(u, tau, kappa);
        g -= huber_rho_grad(u, tau, kappa);
      }
      (*grad)(i, k) = g * norm;
    }
  }
  ad::Tape& tape = x_sorted.tape();
  return tape.record(Matrix::Constant(1, 1, acc * norm), x_sorted.requires_grad(),
                     [ix = x_sorted.id(), grad](ad::Tape& t, const Matrix& g) { t.accumulate(ix, *grad * g(0, 0)); });
}

SampleVec twin_min_targets(std::span<const double> y1, std::span<const double> y2) {
  if (y1.size() != y2.size()) throw InvalidArgument("twin_min_targets: sample counts differ");
  SampleVec a = sort_samples(y1);
  const SampleVec b = sort_samples(y2);
  for (std::size_t k = 0; k < a.size(); ++k) a.values[k] = std::min(a.values[k], b.values[k]);
  return a;
}

Matrix sort_rows(const Matrix& x) {
  Matrix out = x;
  for (Index i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    for (Index j = 0; j < row.size(); ++j) {
      if (!std::isfinite(row(j))) throw InvalidArgument("sort_rows: non-finite sample");
    }
    std::stable_sort(row.begin(), row.end());
  }
  return out;
}

Matrix twin_min_targets(const Matrix& y1, const Matrix& y2) {
  if (y1.rows() != y2.rows() || y1.cols() != y2.cols()) throw InvalidArgument("twin_min_targets: shapes differ");
  return sort_rows(y1).cwiseMin(sort_rows(y2));
}

}  // namespace idac::dist
