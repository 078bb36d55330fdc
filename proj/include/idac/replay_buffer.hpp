#pragma once

#include <cstddef>
#include <vector>

#include "idac/rng.hpp"
#include "idac/transition.hpp"

namespace idac {

/// Fixed-capacity ring of transitions; once full the oldest entry is
/// overwritten. Sampling is uniform with replacement over the filled region.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void add(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// Slot the next add() writes to.
  std::size_t cursor() const { return cursor_; }
  const Transition& at(std::size_t i) const { return data_.at(i); }

  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;
  TransitionBatch gather(const std::vector<std::size_t>& indices) const;
  TransitionBatch sample(std::size_t n, Rng& rng) const { return gather(sample_indices(n, rng)); }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Transition> data_;
};

}  // namespace idac
