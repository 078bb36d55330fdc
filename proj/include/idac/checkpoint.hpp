#pragma once

// Versioned JSON checkpoints. Layout (version 1):
//
//   { "format": "idac-checkpoint", "version": 1, "step": N,
//     "config": { key: value, ... },              // resolved run config, as text
//     "actor":  { "config": {...}, "net": NET },
//     "critics": { "config": {...}, "tau_smooth": t, "online": [NET...], "delayed": [NET...] },
//     "eta": log_alpha,
//     "optimizers": { "actor": ADAM, "critics": [ADAM...], "eta": ADAM } }
//
// NET = { "widths": [...], "tensors": [MAT...] } with tensors in W0, b0, W1, b1
// order; MAT = { "rows": r, "cols": c, "data": [row-major values] };
// ADAM = { "learning_rate", "beta1", "beta2", "epsilon", "step",
//          "first_moment": [MAT...], "second_moment": [MAT...] }.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "idac/actor.hpp"
#include "idac/adam.hpp"
#include "idac/critic.hpp"
#include "idac/trainer.hpp"

namespace idac {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::int64_t step = 0;
  TrainerConfig config;
  ActorParams actor;
  CriticPair critics;
  double eta = 0.0;
  AdamState actor_opt;
  std::vector<AdamState> critic_opt;
  AdamState eta_opt;
};

Checkpoint make_checkpoint(const Trainer& trainer);
void restore_checkpoint(Trainer& trainer, const Checkpoint& ckpt);

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws CheckpointError on unreadable files, a foreign format or another version.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace idac
