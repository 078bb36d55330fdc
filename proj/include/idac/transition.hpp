#pragma once

#include "idac/tensor_types.hpp"

namespace idac {

/// One environment step. Actions are stored in the policy's normalized space.
/// `done` is true only for genuine terminals; timeouts keep it false so the
/// Bellman target still bootstraps.
struct Transition {
  RowVector state;
  RowVector action;
  double reward = 0.0;
  RowVector next_state;
  bool done = false;
};

/// Row-stacked minibatch; rewards and dones are B x 1 (dones as 0/1).
struct TransitionBatch {
  Matrix states;
  Matrix actions;
  Matrix rewards;
  Matrix next_states;
  Matrix dones;

  Index size() const { return states.rows(); }
};

}  // namespace idac
