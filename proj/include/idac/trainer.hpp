#pragma once

// Off-policy IDAC loop: collect one transition, then one update of the
// critics, the actor and the entropy coefficient, then a soft target update.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "idac/actor.hpp"
#include "idac/adam.hpp"
#include "idac/critic.hpp"
#include "idac/envs.hpp"
#include "idac/replay_buffer.hpp"

namespace idac {

/// Every knob of a run. Defaults follow the reference hyperparameter table;
/// the desk-scale presets in configs/ shrink the networks and sample counts.
struct TrainerConfig {
  std::string env = "point_reach";
  EnvOptions env_options;
  std::uint64_t seed = 0;
  std::string run_id = "run";
  /// Runs write to output_dir/run_id unless the CLI overrides the directory.
  std::string output_dir = "runs";

  double gamma = 0.99;
  double learning_rate = 3e-4;
  double tau_smooth = 0.005;
  int batch_size = 256;        // M
  int num_quantiles = 51;      // K
  int num_actions = 51;        // J
  int num_mixture = 21;        // L
  double kappa = 1.0;
  int xi_dim = 5;
  int eps_dim = 5;
  /// NaN means -dim(A).
  double target_entropy = std::numeric_limits<double>::quiet_NaN();
  double initial_alpha = 1.0;
  bool learn_alpha = true;
  std::vector<Index> actor_hidden = {256, 256};
  std::vector<Index> critic_hidden = {256, 256};

  std::int64_t total_steps = 50000;
  std::int64_t warmup_steps = 1000;
  std::int64_t eval_interval = 2000;
  int eval_rollouts = 5;
  std::int64_t checkpoint_interval = 2000;
  int checkpoint_keep = 3;
  std::int64_t replay_capacity = 1000000;

  bool twin_critics = true;
  std::string policy = "sia";  // "sia" or "gaussian"
  bool squash = true;          // tanh squashing on bounded action boxes
  bool independent_target_noise = false;
  /// Skip actor and alpha updates; the policy stays at its initialization.
  bool freeze_actor = false;

  void validate() const;
  bool gaussian_policy() const { return policy == "gaussian"; }
  double resolved_target_entropy(Index action_dim) const;
  ActorConfig actor_config(const EnvSpec& spec) const;
  CriticConfig critic_config(const EnvSpec& spec) const;
};

/// Averages of the per-step training statistics since the last report.
struct TrainStats {
  std::int64_t updates = 0;
  double critic_loss[2] = {0.0, 0.0};
  double actor_loss = 0.0;
  double alpha = 0.0;
  double entropy_estimate = 0.0;  // -mean log pi of the first action per state
  double wasserstein = 0.0;       // mean W1 between sorted online samples and targets

  void accumulate(const TrainStats& step);
  TrainStats averaged() const;
};

struct EvalResult {
  double mean = 0.0;
  double stddev = 0.0;  // population std over rollouts, 0 for one rollout
  std::vector<double> returns;
};

struct MetricsRow {
  std::int64_t step = 0;
  EvalResult eval;
  std::optional<double> train_episode_return;
  std::optional<TrainStats> stats;  // absent when no update happened since the last row
};

/// Maps a normalized action in [-1, 1]^d to the environment box (identity for
/// unbounded specs).
RowVector to_env_action(const EnvSpec& spec, const RowVector& normalized);

/// Deterministic evaluation: each step draws xi once and acts with the squashed
/// mean mu(s, xi). Rollouts run on a private copy of `env` reseeded from `seed`.
EvalResult evaluate(const ActorParams& actor, const Environment& env, int rollouts, std::uint64_t seed);

class Trainer {
 public:
  explicit Trainer(TrainerConfig config);

  /// One environment step (uniform-random during warmup) stored in the buffer.
  Transition collect_step();
  /// One update; returns nullopt (a skipped update) while the buffer holds
  /// fewer than batch_size transitions. Throws DivergenceError on a
  /// non-finite loss or gradient.
  std::optional<TrainStats> train_step();
  EvalResult evaluate(int rollouts);

  const TrainerConfig& config() const { return config_; }
  const EnvSpec& env_spec() const { return env_->spec(); }
  const Environment& env() const { return *env_; }
  const ActorParams& actor() const { return actor_; }
  ActorParams& actor() { return actor_; }
  const CriticPair& critics() const { return critics_; }
  CriticPair& critics() { return critics_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  double eta() const { return eta_(0, 0); }
  double alpha() const;
  std::int64_t env_steps() const { return env_steps_; }
  std::optional<double> last_episode_return() const { return last_episode_return_; }

  const AdamState& actor_optimizer() const { return actor_opt_; }
  const std::vector<AdamState>& critic_optimizers() const { return critic_opt_; }
  const AdamState& eta_optimizer() const { return eta_opt_; }
  /// Replaces parameters and optimizer state (checkpoint restore).
  void restore(ActorParams actor, CriticPair critics, double eta, AdamState actor_opt,
               std::vector<AdamState> critic_opt, AdamState eta_opt, std::int64_t env_steps);

 private:
  TrainerConfig config_;
  std::unique_ptr<Environment> env_;
  ActorParams actor_;
  CriticPair critics_;
  Matrix eta_;  // 1x1, log alpha
  AdamState actor_opt_;
  std::vector<AdamState> critic_opt_;
  AdamState eta_opt_;
  ReplayBuffer buffer_;
  double target_entropy_;

  Rng collect_rng_;
  Rng update_rng_;
  Rng replay_rng_;
  std::uint64_t eval_count_ = 0;

  RowVector state_;
  double episode_return_ = 0.0;
  std::optional<double> last_episode_return_;
  std::int64_t env_steps_ = 0;
};

struct RunResult {
  bool diverged = false;
  std::string message;
  std::filesystem::path checkpoint;  // last checkpoint written
  std::int64_t steps = 0;
  std::vector<MetricsRow> rows;
};

/// Full run into `out_dir`: config.resolved, metrics.csv, timing.csv,
/// checkpoints/. Divergence is reported in the result (with a checkpoint of
/// the last good parameters) rather than thrown.
RunResult run(const TrainerConfig& config, const std::filesystem::path& out_dir);

/// CSV header and row formatting for metrics.csv.
std::string metrics_header();
std::string format_metrics_row(const MetricsRow& row, bool twin);

}  // namespace idac
