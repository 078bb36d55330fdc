#pragma once

#include <cstddef>
#include <vector>

#include "idac/autodiff.hpp"
#include "idac/rng.hpp"

namespace idac {

/// Fully connected network: ReLU between hidden layers, identity on the output.
///
/// `widths` lists layer widths from input to output, so {in, 256, 256, out} has
/// three affine layers. `tensors` holds them flat as W0, b0, W1, b1, ... with
/// W_l of shape widths[l] x widths[l+1] and b_l of shape 1 x widths[l+1]; this
/// flat order is what the optimizer and the checkpoint format see.
struct MlpParams {
  std::vector<Index> widths;
  std::vector<Matrix> tensors;

  /// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static MlpParams uniform_init(std::vector<Index> widths, Rng& rng);
  static MlpParams zeros(std::vector<Index> widths);

  std::size_t layers() const { return tensors.size() / 2; }
  Matrix& weight(std::size_t l) { return tensors[2 * l]; }
  const Matrix& weight(std::size_t l) const { return tensors[2 * l]; }
  Matrix& bias(std::size_t l) { return tensors[2 * l + 1]; }
  const Matrix& bias(std::size_t l) const { return tensors[2 * l + 1]; }
  Index input_width() const { return widths.front(); }
  Index output_width() const { return widths.back(); }
  std::size_t parameter_count() const;
  bool all_finite() const;

  /// Throws InvalidArgument if the tensors don't chain according to `widths`.
  void validate() const;
};

/// Parameters placed on a tape, either tracked (to receive gradients) or constant.
struct BoundMlp {
  std::vector<ad::Tensor> tensors;

  std::size_t layers() const { return tensors.size() / 2; }
};

BoundMlp bind(ad::Tape& tape, const MlpParams& params, bool track);

ad::Tensor forward_mlp(const BoundMlp& net, const ad::Tensor& input);

/// Tape-free evaluation, numerically identical to the tape path.
Matrix forward_mlp(const MlpParams& params, const Matrix& input);

}  // namespace idac
