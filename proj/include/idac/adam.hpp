#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "idac/tensor_types.hpp"

namespace idac {

// beta/epsilon values are the usual Adam defaults; only the learning rate is given upstream.
struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::int64_t step = 0;

  static AdamState for_params(std::span<const Matrix> params, AdamConfig config = {});
};

/// One bias-corrected Adam update in place. Throws DivergenceError (and leaves
/// params and state untouched) if any gradient entry is non-finite.
void adam_step(AdamState& state, std::span<Matrix> params, std::span<const Matrix> grads);

}  // namespace idac
