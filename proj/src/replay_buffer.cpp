#include "idac/replay_buffer.hpp"

#include <cmath>

#include "idac/errors.hpp"

namespace idac {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw InvalidArgument("replay buffer capacity must be positive");
}

void ReplayBuffer::add(Transition t) {
  if (!data_.empty()) {
    const Transition& ref = data_.front();
    if (t.state.size() != ref.state.size() || t.action.size() != ref.action.size() ||
        t.next_state.size() != ref.next_state.size()) {
      throw InvalidArgument("replay buffer: transition dimensions changed");
    }
  }
  if (!std::isfinite(t.reward)) throw InvalidArgument("replay buffer: non-finite reward");
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[cursor_] = std::move(t);
  }
  cursor_ = (cursor_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, Rng& rng) const {
  if (data_.empty()) throw InvalidArgument("replay buffer: sampling from an empty buffer");
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = rng.index(data_.size());
  return idx;
}

TransitionBatch ReplayBuffer::gather(const std::vector<std::size_t>& indices) const {
  const auto n = static_cast<Index>(indices.size());
  const Transition& ref = data_.at(0);
  TransitionBatch b;
  b.states.resize(n, ref.state.size());
  b.actions.resize(n, ref.action.size());
  b.rewards.resize(n, 1);
  b.next_states.resize(n, ref.next_state.size());
  b.dones.resize(n, 1);
  for (Index r = 0; r < n; ++r) {
    const Transition& t = data_.at(indices[static_cast<std::size_t>(r)]);
    b.states.row(r) = t.state;
    b.actions.row(r) = t.action;
    b.rewards(r, 0) = t.reward;
    b.next_states.row(r) = t.next_state;
    b.dones(r, 0) = t.done ? 1.0 : 0.0;
  }
  return b;
}

}  // namespace idac
