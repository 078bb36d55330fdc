#include "idac/mlp.hpp"

#include <cmath>
#include <string>

#include "idac/errors.hpp"

namespace idac {

namespace {
void check_widths(const std::vector<Index>& widths) {
  if (widths.size() < 2) throw InvalidArgument("MLP needs at least input and output widths");
  for (Index w : widths) {
    if (w < 0) throw InvalidArgument("MLP widths must be non-negative");
  }
}
}  // namespace

MlpParams MlpParams::uniform_init(std::vector<Index> widths, Rng& rng) {
  check_widths(widths);
  MlpParams p;
  p.widths = std::move(widths);
  for (std::size_t l = 0; l + 1 < p.widths.size(); ++l) {
    const Index fan_in = p.widths[l];
    const double limit = fan_in > 0 ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 0.0;
    p.tensors.push_back(rng.uniform_matrix(fan_in, p.widths[l + 1], -limit, limit));
    p.tensors.push_back(rng.uniform_matrix(1, p.widths[l + 1], -limit, limit));
  }
  return p;
}

MlpParams MlpParams::zeros(std::vector<Index> widths) {
  check_widths(widths);
  MlpParams p;
  p.widths = std::move(widths);
  for (std::size_t l = 0; l + 1 < p.widths.size(); ++l) {
    p.tensors.push_back(Matrix::Zero(p.widths[l], p.widths[l + 1]));
    p.tensors.push_back(Matrix::Zero(1, p.widths[l + 1]));
  }
  return p;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix& t : tensors) n += static_cast<std::size_t>(t.size());
  return n;
}

bool MlpParams::all_finite() const {
  for (const Matrix& t : tensors) {
    if (!t.allFinite()) return false;
  }
  return true;
}

void MlpParams::validate() const {
  check_widths(widths);
  if (tensors.size() != 2 * (widths.size() - 1)) throw InvalidArgument("MLP tensor count does not match widths");
  for (std::size_t l = 0; l < layers(); ++l) {
    if (weight(l).rows() != widths[l] || weight(l).cols() != widths[l + 1] || bias(l).rows() != 1 ||
        bias(l).cols() != widths[l + 1]) {
      throw InvalidArgument("MLP layer " + std::to_string(l) + " does not chain with its neighbours");
    }
  }
}

BoundMlp bind(ad::Tape& tape, const MlpParams& params, bool track) {
  BoundMlp net;
  net.tensors.reserve(params.tensors.size());
  for (const Matrix& t : params.tensors) net.tensors.push_back(track ? tape.variable(t) : tape.constant(t));
  return net;
}

ad::Tensor forward_mlp(const BoundMlp& net, const ad::Tensor& input) {
  if (net.layers() == 0) throw InvalidArgument("forward_mlp: empty network");
  if (input.cols() != net.tensors[0].rows()) {
    throw InvalidArgument("forward_mlp: input width " + std::to_string(input.cols()) + " != network input width " +
                          std::to_string(net.tensors[0].rows()));
  }
  ad::Tensor h = input;
  for (std::size_t l = 0; l < net.layers(); ++l) {
    h = ad::affine(h, net.tensors[2 * l], net.tensors[2 * l + 1]);
    if (l + 1 < net.layers()) h = ad::relu(h);
  }
  return h;
}

Matrix forward_mlp(const MlpParams& params, const Matrix& input) {
  if (params.layers() == 0) throw InvalidArgument("forward_mlp: empty network");
  if (input.cols() != params.input_width()) {
    throw InvalidArgument("forward_mlp: input width " + std::to_string(input.cols()) + " != network input width " +
                          std::to_string(params.input_width()));
  }
  Matrix h = input;
  for (std::size_t l = 0; l < params.layers(); ++l) {
    Matrix next = h * params.weight(l);
    next.rowwise() += params.bias(l).row(0);
    if (l + 1 < params.layers()) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  return h;
}

}  // namespace idac
