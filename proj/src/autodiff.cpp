#include "idac/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <string>

#include "idac/errors.hpp"

namespace idac::ad {

const Matrix& Tensor::value() const { return tape_->value(id_); }
bool Tensor::requires_grad() const { return tape_->requires_grad(id_); }

double Tensor::item() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw InvalidArgument("item() on a non-scalar tensor");
  return v(0, 0);
}

Tensor Tape::constant(Matrix value) { return record(std::move(value), false, {}); }

Tensor Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Tensor Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), true, false, {}});
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::record(Matrix value, bool requires_grad, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Tensor(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.has_grad) {
    n.grad += g;
  } else {
    n.grad = g;
    n.has_grad = true;
  }
}

void Tape::backward(const Tensor& loss) {
  if (loss.tape_ != this) throw InvalidArgument("backward: loss belongs to another tape");
  const Matrix& lv = value(loss.id());
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw InvalidArgument("backward: loss must be scalar, got " + std::to_string(lv.rows()) + "x" +
                          std::to_string(lv.cols()));
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  if (!nodes_[loss.id()].requires_grad) return;
  accumulate(loss.id(), Matrix::Ones(1, 1));
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.has_grad && n.backward) n.backward(*this, n.grad);
  }
}

Matrix Tape::grad(const Tensor& t) const {
  const Node& n = nodes_[t.id()];
  if (n.has_grad) return n.grad;
  return Matrix::Zero(n.value.rows(), n.value.cols());
}

std::vector<Matrix> Tape::grads(std::span<const Tensor> ts) const {
  std::vector<Matrix> out;
  out.reserve(ts.size());
  for (const Tensor& t : ts) out.push_back(grad(t));
  return out;
}

bool Tape::reached(const Tensor& t) const { return nodes_[t.id()].has_grad; }

namespace {

Tape& tape_of(const Tensor& a) {
  if (!a.valid()) throw InvalidArgument("operation on an unbound tensor");
  return a.tape();
}

Tape& common_tape(const Tensor& a, const Tensor& b) {
  Tape& t = tape_of(a);
  if (&tape_of(b) != &t) throw InvalidArgument("operands recorded on different tapes");
  return t;
}

Index broadcast_dim(Index x, Index y, const char* op) {
  if (x == y) return x;
  if (x == 1) return y;
  if (y == 1) return x;
  throw InvalidArgument(std::string(op) + ": incompatible shapes for broadcasting");
}

Matrix expand(const Matrix& m, Index r, Index c) {
  if (m.rows() == r && m.cols() == c) return m;
  return m.replicate(r / m.rows(), c / m.cols());
}

Matrix reduce_to(Matrix g, Index r, Index c) {
  if (r == 1 && g.rows() != 1) g = g.colwise().sum().eval();
  if (c == 1 && g.cols() != 1) g = g.rowwise().sum().eval();
  return g;
}

template <class Fwd, class GradA, class GradB>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, GradA grad_a,
                 GradB grad_b) {
  Tape& tape = common_tape(a, b);
  const Index r = broadcast_dim(a.rows(), b.rows(), name);
  const Index c = broadcast_dim(a.cols(), b.cols(), name);
  Matrix out = fwd(expand(a.value(), r, c), expand(b.value(), r, c));
  const bool rg = a.requires_grad() || b.requires_grad();
  return tape.record(std::move(out), rg,
                     [ia = a.id(), ib = b.id(), r, c, grad_a, grad_b](Tape& t, const Matrix& g) {
                       const Matrix& va = t.value(ia);
                       const Matrix& vb = t.value(ib);
                       const Matrix ea = expand(va, r, c);
                       const Matrix eb = expand(vb, r, c);
                       if (t.requires_grad(ia)) t.accumulate(ia, reduce_to(grad_a(g, ea, eb), va.rows(), va.cols()));
                       if (t.requires_grad(ib)) t.accumulate(ib, reduce_to(grad_b(g, ea, eb), vb.rows(), vb.cols()));
                     });
}

// grad(g, x) returns dL/dx given dL/dout.
template <class Fwd, class Grad>
Tensor unary_op(const Tensor& a, Fwd fwd, Grad grad) {
  Tape& tape = tape_of(a);
  Matrix out = fwd(a.value());
  return tape.record(std::move(out), a.requires_grad(), [ia = a.id(), grad](Tape& t, const Matrix& g) {
    t.accumulate(ia, grad(g, t.value(ia)));
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "add", [](const Matrix& x, const Matrix& y) -> Matrix { return x + y; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "sub", [](const Matrix& x, const Matrix& y) -> Matrix { return x - y; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "mul", [](const Matrix& x, const Matrix& y) -> Matrix { return x.cwiseProduct(y); },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix { return g.cwiseProduct(y); },
      [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix { return g.cwiseProduct(x); });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "div", [](const Matrix& x, const Matrix& y) -> Matrix { return x.cwiseQuotient(y); },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix { return g.cwiseQuotient(y); },
      [](const Matrix& g, const Matrix& x, const Matrix& y) -> Matrix {
        return (-g.array() * x.array() / y.array().square()).matrix();
      });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double k) {
  return unary_op(
      a, [k](const Matrix& x) -> Matrix { return x * k; },
      [k](const Matrix& g, const Matrix&) -> Matrix { return g * k; });
}

Tensor add_scalar(const Tensor& a, double k) {
  return unary_op(
      a, [k](const Matrix& x) -> Matrix { return (x.array() + k).matrix(); },
      [](const Matrix& g, const Matrix&) -> Matrix { return g; });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      a, [](const Matrix& x) -> Matrix { return x.array().exp().matrix(); },
      [](const Matrix& g, const Matrix& x) -> Matrix { return g.cwiseProduct(x.array().exp().matrix()); });
}

Tensor log(const Tensor& a) {
  return unary_op(
      a, [](const Matrix& x) -> Matrix { return x.array().log().matrix(); },
      [](const Matrix& g, const Matrix& x) -> Matrix { return g.cwiseQuotient(x); });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      a, [](const Matrix& x) -> Matrix { return x.array().tanh().matrix(); },
      [](const Matrix& g, const Matrix& x) -> Matrix {
        return (g.array() * (1.0 - x.array().tanh().square())).matrix();
      });
}

namespace {
double softplus_scalar(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Tensor softplus(const Tensor& a) {
  return unary_op(
      a, [](const Matrix& x) -> Matrix { return x.unaryExpr(&softplus_scalar); },
      [](const Matrix& g, const Matrix& x) -> Matrix { return g.cwiseProduct(x.unaryExpr(&sigmoid_scalar)); });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      a, [](const Matrix& x) -> Matrix { return x.cwiseMax(0.0); },
      // derivative at 0 is 0
      [](const Matrix& g, const Matrix& x) -> Matrix { return (x.array() > 0.0).select(g, 0.0).matrix(); });
}

Tensor square(const Tensor& a) {
  return unary_op(
      a, [](const Matrix& x) -> Matrix { return x.array().square().matrix(); },
      [](const Matrix& g, const Matrix& x) -> Matrix { return (2.0 * g.array() * x.array()).matrix(); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (!(lo <= hi)) throw InvalidArgument("clamp: lo > hi");
  return unary_op(
      a, [lo, hi](const Matrix& x) -> Matrix { return x.cwiseMax(lo).cwiseMin(hi); },
      [lo, hi](const Matrix& g, const Matrix& x) -> Matrix {
        return (x.array() >= lo && x.array() <= hi).select(g, 0.0).matrix();
      });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tape& tape = common_tape(a, b);
  if (a.cols() != b.rows()) throw InvalidArgument("matmul: inner dimensions differ");
  Matrix out = a.value() * b.value();
  return tape.record(std::move(out), a.requires_grad() || b.requires_grad(),
                     [ia = a.id(), ib = b.id()](Tape& t, const Matrix& g) {
                       if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
                       if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
                     });
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tape& tape = common_tape(x, w);
  common_tape(x, b);
  if (x.cols() != w.rows()) {
    throw InvalidArgument("affine: input width " + std::to_string(x.cols()) + " != layer input width " +
                          std::to_string(w.rows()));
  }
  if (b.rows() != 1 || b.cols() != w.cols()) throw InvalidArgument("affine: bias must be 1 x out");
  Matrix out = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  const bool rg = x.requires_grad() || w.requires_grad() || b.requires_grad();
  return tape.record(std::move(out), rg, [ix = x.id(), iw = w.id(), ib = b.id()](Tape& t, const Matrix& g) {
    if (t.requires_grad(ix)) t.accumulate(ix, g * t.value(iw).transpose());
    if (t.requires_grad(iw)) t.accumulate(iw, t.value(ix).transpose() * g);
    if (t.requires_grad(ib)) t.accumulate(ib, g.colwise().sum());
  });
}

Tensor sum(const Tensor& a) {
  Tape& tape = tape_of(a);
  return tape.record(Matrix::Constant(1, 1, a.value().sum()), a.requires_grad(),
                     [ia = a.id()](Tape& t, const Matrix& g) {
                       const Matrix& v = t.value(ia);
                       t.accumulate(ia, Matrix::Constant(v.rows(), v.cols(), g(0, 0)));
                     });
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw InvalidArgument("mean of an empty tensor");
  return scale(sum(a), 1.0 / n);
}

Tensor row_sum(const Tensor& a) {
  Tape& tape = tape_of(a);
  Matrix out = a.value().rowwise().sum();
  return tape.record(std::move(out), a.requires_grad(), [ia = a.id()](Tape& t, const Matrix& g) {
    t.accumulate(ia, g.replicate(1, t.value(ia).cols()));
  });
}

Tensor row_max(const Tensor& a) {
  Tape& tape = tape_of(a);
  const Matrix& v = a.value();
  if (v.cols() == 0) throw InvalidArgument("row_max of an empty row");
  auto arg = std::make_shared<std::vector<Index>>(v.rows());
  Matrix out(v.rows(), 1);
  for (Index i = 0; i < v.rows(); ++i) {
    Index j = 0;
    out(i, 0) = v.row(i).maxCoeff(&j);
    (*arg)[i] = j;
  }
  return tape.record(std::move(out), a.requires_grad(), [ia = a.id(), arg](Tape& t, const Matrix& g) {
    const Matrix& v = t.value(ia);
    Matrix ga = Matrix::Zero(v.rows(), v.cols());
    for (Index i = 0; i < v.rows(); ++i) ga(i, (*arg)[i]) = g(i, 0);
    t.accumulate(ia, ga);
  });
}

Tensor row_log_sum_exp(const Tensor& a) {
  Tape& tape = tape_of(a);
  const Matrix& v = a.value();
  if (v.cols() == 0) throw InvalidArgument("row_log_sum_exp of an empty row");
  Matrix out(v.rows(), 1);
  for (Index i = 0; i < v.rows(); ++i) {
    const double m = v.row(i).maxCoeff();
    out(i, 0) = m + std::log((v.row(i).array() - m).exp().sum());
  }
  return tape.record(std::move(out), a.requires_grad(), [ia = a.id()](Tape& t, const Matrix& g) {
    const Matrix& v = t.value(ia);
    Matrix ga(v.rows(), v.cols());
    for (Index i = 0; i < v.rows(); ++i) {
      const double m = v.row(i).maxCoeff();
      auto w = (v.row(i).array() - m).exp();
      ga.row(i) = (w / w.sum()).matrix() * g(i, 0);
    }
    t.accumulate(ia, ga);
  });
}

Tensor stop_gradient(const Tensor& a) { return tape_of(a).constant(a.value()); }

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw InvalidArgument("concat_cols: no inputs");
  Tape& tape = tape_of(parts[0]);
  const Index rows = parts[0].rows();
  Index cols = 0;
  bool rg = false;
  std::vector<std::size_t> ids;
  for (const Tensor& p : parts) {
    common_tape(parts[0], p);
    if (p.rows() != rows) throw InvalidArgument("concat_cols: row counts differ");
    cols += p.cols();
    rg = rg || p.requires_grad();
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  Index c = 0;
  for (const Tensor& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return tape.record(std::move(out), rg, [ids](Tape& t, const Matrix& g) {
    Index c = 0;
    for (std::size_t id : ids) {
      const Index w = t.value(id).cols();
      if (t.requires_grad(id)) t.accumulate(id, g.middleCols(c, w));
      c += w;
    }
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw InvalidArgument("concat_rows: no inputs");
  Tape& tape = tape_of(parts[0]);
  const Index cols = parts[0].cols();
  Index rows = 0;
  bool rg = false;
  std::vector<std::size_t> ids;
  for (const Tensor& p : parts) {
    common_tape(parts[0], p);
    if (p.cols() != cols) throw InvalidArgument("concat_rows: column counts differ");
    rows += p.rows();
    rg = rg || p.requires_grad();
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  Index r = 0;
  for (const Tensor& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return tape.record(std::move(out), rg, [ids](Tape& t, const Matrix& g) {
    Index r = 0;
    for (std::size_t id : ids) {
      const Index h = t.value(id).rows();
      if (t.requires_grad(id)) t.accumulate(id, g.middleRows(r, h));
      r += h;
    }
  });
}

Tensor slice_cols(const Tensor& a, Index begin, Index count) {
  Tape& tape = tape_of(a);
  if (begin < 0 || count < 0 || begin + count > a.cols()) throw InvalidArgument("slice_cols: out of range");
  Matrix out = a.value().middleCols(begin, count);
  return tape.record(std::move(out), a.requires_grad(), [ia = a.id(), begin, count](Tape& t, const Matrix& g) {
    const Matrix& v = t.value(ia);
    Matrix ga = Matrix::Zero(v.rows(), v.cols());
    ga.middleCols(begin, count) = g;
    t.accumulate(ia, ga);
  });
}

Tensor gather_rows(const Tensor& a, std::span<const Index> rows) {
  Tape& tape = tape_of(a);
  const Matrix& v = a.value();
  auto idx = std::make_shared<std::vector<Index>>(rows.begin(), rows.end());
  Matrix out(static_cast<Index>(idx->size()), v.cols());
  for (std::size_t r = 0; r < idx->size(); ++r) {
    const Index src = (*idx)[r];
    if (src < 0 || src >= v.rows()) throw InvalidArgument("gather_rows: index out of range");
    out.row(static_cast<Index>(r)) = v.row(src);
  }
  return tape.record(std::move(out), a.requires_grad(), [ia = a.id(), idx](Tape& t, const Matrix& g) {
    const Matrix& v = t.value(ia);
    Matrix ga = Matrix::Zero(v.rows(), v.cols());
    for (std::size_t r = 0; r < idx->size(); ++r) ga.row((*idx)[r]) += g.row(static_cast<Index>(r));
    t.accumulate(ia, ga);
  });
}

Tensor reshape(const Tensor& a, Index rows, Index cols) {
  Tape& tape = tape_of(a);
  const Matrix& v = a.value();
  if (rows * cols != v.size()) throw InvalidArgument("reshape: element count changes");
  Matrix out = Eigen::Map<const Matrix>(v.data(), rows, cols);
  return tape.record(std::move(out), a.requires_grad(), [ia = a.id()](Tape& t, const Matrix& g) {
    const Matrix& v = t.value(ia);
    t.accumulate(ia, Eigen::Map<const Matrix>(g.data(), v.rows(), v.cols()));
  });
}

Tensor sort_rows(const Tensor& a) {
  Tape& tape = tape_of(a);
  const Matrix& v = a.value();
  auto perm = std::make_shared<std::vector<Index>>(static_cast<std::size_t>(v.size()));
  Matrix out(v.rows(), v.cols());
  for (Index i = 0; i < v.rows(); ++i) {
    Index* p = perm->data() + i * v.cols();
    std::iota(p, p + v.cols(), Index{0});
    std::stable_sort(p, p + v.cols(), [&](Index x, Index y) { return v(i, x) < v(i, y); });
    for (Index j = 0; j < v.cols(); ++j) out(i, j) = v(i, p[j]);
  }
  return tape.record(std::move(out), a.requires_grad(), [ia = a.id(), perm](Tape& t, const Matrix& g) {
    const Matrix& v = t.value(ia);
    Matrix ga(v.rows(), v.cols());
    for (Index i = 0; i < v.rows(); ++i) {
      const Index* p = perm->data() + i * v.cols();
      for (Index j = 0; j < v.cols(); ++j) ga(i, p[j]) = g(i, j);
    }
    t.accumulate(ia, ga);
  });
}

Tensor gaussian_log_pdf(const Tensor& x, const Tensor& mu, const Tensor& sigma) {
  Tape& tape = common_tape(x, mu);
  common_tape(x, sigma);
  if (x.shape() != mu.shape() || x.shape() != sigma.shape()) {
    throw InvalidArgument("gaussian_log_pdf: x, mu, sigma shapes differ");
  }
  constexpr double half_log_2pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)
  const auto z = ((x.value() - mu.value()).array() / sigma.value().array()).eval();
  Matrix out = (-0.5 * z.square() - sigma.value().array().log() - half_log_2pi).matrix().rowwise().sum();
  const bool rg = x.requires_grad() || mu.requires_grad() || sigma.requires_grad();
  return tape.record(std::move(out), rg, [ix = x.id(), im = mu.id(), is = sigma.id()](Tape& t, const Matrix& g) {
    const auto s = t.value(is).array();
    const auto z = ((t.value(ix) - t.value(im)).array() / s).eval();
    const auto gb = g.replicate(1, t.value(ix).cols()).array().eval();
    if (t.requires_grad(ix)) t.accumulate(ix, (-gb * z / s).matrix());
    if (t.requires_grad(im)) t.accumulate(im, (gb * z / s).matrix());
    if (t.requires_grad(is)) t.accumulate(is, (gb * (z.square() - 1.0) / s).matrix());
  });
}

}  // namespace idac::ad
