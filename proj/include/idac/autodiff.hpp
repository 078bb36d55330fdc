#pragma once

// Reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every operation applied to Tensors created on it; backward()
// replays the records in reverse. Tensors are lightweight handles (tape, slot),
// valid only while their Tape is alive. Every value is a 2-D matrix; vectors
// are 1xN or Nx1 and scalars are 1x1.

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "idac/tensor_types.hpp"

namespace idac::ad {

class Tape;

class Tensor {
 public:
  Tensor() = default;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  std::vector<Index> shape() const { return {rows(), cols()}; }
  bool requires_grad() const;
  /// Value of a 1x1 tensor.
  double item() const;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Tensor(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Receives the gradient of the loss w.r.t. the node's output and must
  /// accumulate into its parents via Tape::accumulate.
  using BackwardFn = std::function<void(Tape&, const Matrix&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives gradient.
  Tensor constant(Matrix value);
  Tensor constant(double value);
  /// Leaf whose gradient is tracked.
  Tensor variable(Matrix value);

  /// Appends an interior node. `backward` is only stored when `requires_grad`.
  Tensor record(Matrix value, bool requires_grad, BackwardFn backward);

  /// Populates gradients of `loss` (must be 1x1) w.r.t. every tracked node.
  void backward(const Tensor& loss);

  /// Gradient accumulated for `t` by the last backward(); zeros if unreached.
  Matrix grad(const Tensor& t) const;
  std::vector<Matrix> grads(std::span<const Tensor> ts) const;
  bool reached(const Tensor& t) const;

  void accumulate(std::size_t id, const Matrix& g);
  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };
  // deque: references to existing nodes survive push_back.
  std::deque<Node> nodes_;
};

// ---- elementwise (operands broadcast when a dimension is 1) ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double k);
Tensor add_scalar(const Tensor& a, double k);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(const Tensor& a, double k) { return scale(a, k); }
inline Tensor operator*(double k, const Tensor& a) { return scale(a, k); }
inline Tensor operator+(const Tensor& a, double k) { return add_scalar(a, k); }
inline Tensor operator-(const Tensor& a, double k) { return add_scalar(a, -k); }

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor square(const Tensor& a);
/// Gradient passes where lo <= a <= hi, zero outside.
Tensor clamp(const Tensor& a, double lo, double hi);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);
/// x * w + b with b a 1xN row broadcast over rows.
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);

// ---- reductions ----
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Per-row reductions, each returning an Rx1 column.
Tensor row_sum(const Tensor& a);
Tensor row_max(const Tensor& a);
Tensor row_log_sum_exp(const Tensor& a);

// ---- structure ----
/// Forward identity, blocks gradient.
Tensor stop_gradient(const Tensor& a);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, Index begin, Index count);
/// out.row(r) = a.row(rows[r]); backward scatters-adds.
Tensor gather_rows(const Tensor& a, std::span<const Index> rows);
/// Row-major reinterpretation with the same element count.
Tensor reshape(const Tensor& a, Index rows, Index cols);
/// Stable ascending sort of each row; gradient follows the chosen permutation.
Tensor sort_rows(const Tensor& a);

// ---- densities ----
/// Diagonal Gaussian log-density of each row of x; returns Rx1.
Tensor gaussian_log_pdf(const Tensor& x, const Tensor& mu, const Tensor& sigma);

}  // namespace idac::ad
