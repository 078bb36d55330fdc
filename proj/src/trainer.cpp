#include "idac/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "idac/checkpoint.hpp"
#include "idac/config.hpp"
#include "idac/distributional.hpp"
#include "idac/errors.hpp"

namespace idac {

namespace {

// Independent random streams of one run, keyed off the run seed.
enum Stream : std::uint64_t {
  kInitStream = 1,
  kEnvStream = 2,
  kCollectStream = 3,
  kUpdateStream = 4,
  kReplayStream = 5,
  kEvalStream = 1000,
};

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument("config: " + what);
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DivergenceError(std::string(what) + " became non-finite");
}

}  // namespace

// ---- TrainerConfig ----

void TrainerConfig::validate() const {
  bool known = false;
  for (const auto& n : env_names()) known = known || n == env;
  require(known, "unknown env '" + env + "'");
  require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0, 1)");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(tau_smooth > 0.0 && tau_smooth <= 1.0, "tau_smooth must lie in (0, 1]");
  require(batch_size >= 1, "batch_size must be positive");
  require(num_quantiles >= 1, "num_quantiles must be positive");
  require(num_actions >= 1, "num_actions must be positive");
  require(num_mixture >= 0, "num_mixture must be non-negative");
  require(kappa > 0.0, "kappa must be positive");
  require(xi_dim >= 1 || policy == "gaussian", "xi_dim must be positive for the sia policy");
  require(xi_dim >= 0, "xi_dim must be non-negative");
  require(eps_dim >= 1, "eps_dim must be positive");
  require(initial_alpha > 0.0, "initial_alpha must be positive");
  require(total_steps >= 0, "total_steps must be non-negative");
  require(warmup_steps >= 0, "warmup_steps must be non-negative");
  require(eval_interval >= 1, "eval_interval must be positive");
  require(eval_rollouts >= 1, "eval_rollouts must be positive");
  require(checkpoint_interval >= 1, "checkpoint_interval must be positive");
  require(checkpoint_keep >= 1, "checkpoint_keep must be positive");
  require(replay_capacity >= 1, "replay_capacity must be positive");
  require(policy == "sia" || policy == "gaussian", "policy must be sia or gaussian");
  require(env_options.chain_mu.size() == env_options.chain_sigma.size() && !env_options.chain_mu.empty(),
          "chain_mu and chain_sigma must be non-empty and equally long");
  for (double s : env_options.chain_sigma) require(s >= 0.0, "chain_sigma entries must be non-negative");
  require(env_options.point_reach_horizon >= 1, "point_reach_horizon must be positive");
  require(env_options.correlation_anisotropy > 0.0, "correlation_anisotropy must be positive");
}

double TrainerConfig::resolved_target_entropy(Index action_dim) const {
  return std::isnan(target_entropy) ? -static_cast<double>(action_dim) : target_entropy;
}

ActorConfig TrainerConfig::actor_config(const EnvSpec& spec) const {
  ActorConfig c;
  c.state_dim = spec.state_dim;
  c.action_dim = spec.action_dim;
  c.xi_dim = gaussian_policy() ? 0 : xi_dim;
  c.hidden = actor_hidden;
  c.squash = squash && spec.bounded;
  return c;
}

CriticConfig TrainerConfig::critic_config(const EnvSpec& spec) const {
  CriticConfig c;
  c.state_dim = spec.state_dim;
  c.action_dim = spec.action_dim;
  c.eps_dim = eps_dim;
  c.hidden = critic_hidden;
  return c;
}

// ---- TrainStats ----

void TrainStats::accumulate(const TrainStats& s) {
  updates += s.updates;
  critic_loss[0] += s.critic_loss[0];
  critic_loss[1] += s.critic_loss[1];
  actor_loss += s.actor_loss;
  alpha += s.alpha;
  entropy_estimate += s.entropy_estimate;
  wasserstein += s.wasserstein;
}

TrainStats TrainStats::averaged() const {
  TrainStats a = *this;
  if (updates == 0) return a;
  const double n = static_cast<double>(updates);
  a.critic_loss[0] /= n;
  a.critic_loss[1] /= n;
  a.actor_loss /= n;
  a.alpha /= n;
  a.entropy_estimate /= n;
  a.wasserstein /= n;
  a.updates = 1;
  return a;
}

// ---- evaluation ----

RowVector to_env_action(const EnvSpec& spec, const RowVector& a) {
  if (!spec.bounded) return a;
  const RowVector half = (spec.action_high - spec.action_low) * 0.5;
  const RowVector mid = (spec.action_high + spec.action_low) * 0.5;
  return (mid.array() + a.array() * half.array()).matrix();
}

EvalResult evaluate(const ActorParams& actor, const Environment& env, int rollouts, std::uint64_t seed) {
  if (rollouts < 1) throw InvalidArgument("evaluate: need at least one rollout");
  std::unique_ptr<Environment> e = env.clone();
  e->seed(Rng::derive(seed, 0).next_u64());
  Rng rng = Rng::derive(seed, 1);
  const EnvSpec& spec = e->spec();
  const Index xi_dim = actor.config.xi_dim;
  const Policy policy = [&](const RowVector& s) {
    const Matrix xi = rng.normal_matrix(1, xi_dim);
    const RowVector a = mean_action(actor, s, xi);
    return to_env_action(spec, a);
  };
  EvalResult r;
  r.returns = rollout_returns(*e, policy, rollouts);
  double sum = 0.0;
  for (double x : r.returns) sum += x;
  r.mean = sum / static_cast<double>(rollouts);
  double ss = 0.0;
  for (double x : r.returns) ss += (x - r.mean) * (x - r.mean);
  r.stddev = std::sqrt(ss / static_cast<double>(rollouts));
  return r;
}

// ---- Trainer ----

Trainer::Trainer(TrainerConfig config)
    : config_(std::move(config)),
      buffer_(static_cast<std::size_t>(std::max<std::int64_t>(config_.replay_capacity, 1))),
      collect_rng_(Rng::derive(config_.seed, kCollectStream)),
      update_rng_(Rng::derive(config_.seed, kUpdateStream)),
      replay_rng_(Rng::derive(config_.seed, kReplayStream)) {
  config_.env_options.gamma = config_.gamma;
  config_.validate();
  env_ = make_env(config_.env, config_.env_options, Rng::derive(config_.seed, kEnvStream).next_u64());
  const EnvSpec& spec = env_->spec();
  Rng init = Rng::derive(config_.seed, kInitStream);
  actor_ = ActorParams::init(config_.actor_config(spec), init);
  critics_ = CriticPair::init(config_.critic_config(spec), config_.twin_critics, config_.tau_smooth, init);
  eta_ = Matrix::Constant(1, 1, std::log(config_.initial_alpha));
  const AdamConfig adam{config_.learning_rate};
  actor_opt_ = AdamState::for_params(actor_.net.tensors, adam);
  for (const MlpParams& w : critics_.online) critic_opt_.push_back(AdamState::for_params(w.tensors, adam));
  eta_opt_ = AdamState::for_params(std::span<const Matrix>(&eta_, 1), adam);
  target_entropy_ = config_.resolved_target_entropy(spec.action_dim);
  state_ = env_->reset();
}

double Trainer::alpha() const { return std::exp(eta_(0, 0)); }

Transition Trainer::collect_step() {
  const EnvSpec& spec = env_->spec();
  RowVector a(spec.action_dim);
  if (env_steps_ < config_.warmup_steps) {
    for (Index d = 0; d < spec.action_dim; ++d) a(d) = collect_rng_.uniform(-1.0, 1.0);
  } else {
    const Matrix xi = collect_rng_.normal_matrix(1, actor_.config.xi_dim);
    const Matrix e = collect_rng_.normal_matrix(1, spec.action_dim);
    a = sample_action(actor_, state_, xi, e);
  }
  const StepResult r = env_->step(to_env_action(spec, a));
  if (!std::isfinite(r.reward) || !r.state.allFinite()) {
    throw DivergenceError("environment " + env_->name() + " produced a non-finite transition");
  }
  Transition t{state_, a, r.reward, r.state, r.terminal};
  buffer_.add(t);
  ++env_steps_;
  episode_return_ += r.reward;
  if (r.terminal || r.truncated) {
    last_episode_return_ = episode_return_;
    episode_return_ = 0.0;
    state_ = env_->reset();
  } else {
    state_ = r.state;
  }
  return t;
}

std::optional<TrainStats> Trainer::train_step() {
  const auto m = static_cast<std::size_t>(config_.batch_size);
  if (buffer_.size() < m) return std::nullopt;
  const EnvSpec& spec = env_->spec();
  const Index k = config_.num_quantiles;
  const Index b = config_.batch_size;
  TrainStats stats;
  stats.updates = 1;

  const TransitionBatch batch = buffer_.sample(m, replay_rng_);

  // Bellman targets from the delayed critics at a' ~ pi(.|s').
  const Matrix xi_next = update_rng_.normal_matrix(b, actor_.config.xi_dim);
  const Matrix e_next = update_rng_.normal_matrix(b, spec.action_dim);
  const Matrix a_next = sample_action(actor_, batch.next_states, xi_next, e_next);
  const Matrix eps_next = update_rng_.normal_matrix(b * k, config_.eps_dim);
  Matrix eps_next_second;
  if (config_.independent_target_noise && critics_.twin()) {
    eps_next_second = update_rng_.normal_matrix(b * k, config_.eps_dim);
  }
  const Matrix targets = build_targets(critics_, batch, a_next, eps_next, config_.gamma,
                                       eps_next_second.size() > 0 ? &eps_next_second : nullptr);

  // Critic update.
  {
    ad::Tape tape;
    const Matrix eps = update_rng_.normal_matrix(b * k, config_.eps_dim);
    const CriticLoss cl = critic_loss(tape, critics_, batch, targets, eps, config_.kappa);
    check_finite(cl.total.item(), "critic loss");
    tape.backward(cl.total);
    for (std::size_t z = 0; z < critics_.count(); ++z) {
      stats.critic_loss[z] = cl.per_critic[z].item();
      const std::vector<Matrix> g = tape.grads(cl.online[z].tensors);
      adam_step(critic_opt_[z], critics_.online[z].tensors, g);
    }
    double w = 0.0;
    for (Index i = 0; i < b; ++i) {
      w += (cl.sorted_first.row(i) - targets.row(i)).cwiseAbs().mean();
    }
    stats.wasserstein = w / static_cast<double>(b);
  }

  // Actor and entropy coefficient.
  if (!config_.freeze_actor) {
    const int l = actor_.config.xi_dim == 0 ? 0 : config_.num_mixture;
    const SiaNoise noise = SiaNoise::sample(b, config_.num_actions, l, actor_.config.xi_dim, spec.action_dim,
                                            config_.eps_dim, update_rng_);
    ad::Tape tape;
    const ActorLoss al = actor_loss(tape, actor_, critics_, batch.states, noise, alpha());
    check_finite(al.loss.item(), "actor loss");
    tape.backward(al.loss);
    adam_step(actor_opt_, actor_.net.tensors, tape.grads(al.actor.tensors));
    stats.actor_loss = al.loss.item();
    stats.entropy_estimate = -al.first_log_pi.mean();

    if (config_.learn_alpha) {
      ad::Tape etape;
      const ad::Tensor eta = etape.variable(eta_);
      const ad::Tensor loss = alpha_loss(eta, al.first_log_pi, target_entropy_);
      check_finite(loss.item(), "alpha loss");
      etape.backward(loss);
      const Matrix g = etape.grad(eta);
      adam_step(eta_opt_, std::span<Matrix>(&eta_, 1), std::span<const Matrix>(&g, 1));
    }
  }
  stats.alpha = alpha();

  soft_update(critics_);
  return stats;
}

EvalResult Trainer::evaluate(int rollouts) {
  return idac::evaluate(actor_, *env_, rollouts, Rng::derive(config_.seed, kEvalStream + eval_count_++).next_u64());
}

void Trainer::restore(ActorParams actor, CriticPair critics, double eta, AdamState actor_opt,
                      std::vector<AdamState> critic_opt, AdamState eta_opt, std::int64_t env_steps) {
  if (actor.net.widths != actor_.net.widths || critics.count() != critics_.count() ||
      critics.online.front().widths != critics_.online.front().widths) {
    throw CheckpointError("checkpoint networks do not match the trainer configuration");
  }
  actor_ = std::move(actor);
  critics_ = std::move(critics);
  eta_(0, 0) = eta;
  actor_opt_ = std::move(actor_opt);
  critic_opt_ = std::move(critic_opt);
  eta_opt_ = std::move(eta_opt);
  env_steps_ = env_steps;
}

// ---- metrics ----

std::string metrics_header() {
  return "step,eval_return_mean,eval_return_std,train_episode_return,critic1_loss,critic2_loss,actor_loss,alpha,"
         "entropy_estimate,wasserstein";
}

std::string format_metrics_row(const MetricsRow& row, bool twin) {
  std::ostringstream o;
  o << row.step << ',' << format_double(row.eval.mean) << ',' << format_double(row.eval.stddev) << ',';
  if (row.train_episode_return) o << format_double(*row.train_episode_return);
  o << ',';
  if (row.stats) {
    const TrainStats& s = *row.stats;
    o << format_double(s.critic_loss[0]) << ',';
    if (twin) o << format_double(s.critic_loss[1]);
    o << ',' << format_double(s.actor_loss) << ',' << format_double(s.alpha) << ','
      << format_double(s.entropy_estimate) << ',' << format_double(s.wasserstein);
  } else {
    o << ",,,,,";
  }
  return o.str();
}

// ---- run ----

namespace {

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << text;
    if (!f.flush()) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

class CheckpointWriter {
 public:
  CheckpointWriter(std::filesystem::path dir, int keep) : dir_(std::move(dir)), keep_(keep) {
    std::filesystem::create_directories(dir_);
  }

  std::filesystem::path write(const Trainer& trainer, const std::string& name) {
    const std::filesystem::path path = dir_ / (name + ".json");
    save_checkpoint(make_checkpoint(trainer), path);
    return path;
  }

  std::filesystem::path write_step(const Trainer& trainer) {
    char name[32];
    std::snprintf(name, sizeof name, "step_%09lld", static_cast<long long>(trainer.env_steps()));
    const std::filesystem::path path = write(trainer, name);
    written_.push_back(path);
    while (static_cast<int>(written_.size()) > keep_) {
      std::filesystem::remove(written_.front());
      written_.erase(written_.begin());
    }
    save_checkpoint(make_checkpoint(trainer), dir_ / "latest.json");
    return path;
  }

 private:
  std::filesystem::path dir_;
  int keep_;
  std::vector<std::filesystem::path> written_;
};

}  // namespace

RunResult run(const TrainerConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  write_text_atomic(out_dir / "config.resolved", format_config(config));

  Trainer trainer(config);
  CheckpointWriter ckpt(out_dir / "checkpoints", config.checkpoint_keep);
  std::filesystem::create_directories(out_dir / "diag");

  std::ofstream metrics(out_dir / "metrics.csv", std::ios::trunc);
  std::ofstream timing(out_dir / "timing.csv", std::ios::trunc);
  if (!metrics || !timing) throw std::runtime_error("cannot open metrics files in " + out_dir.string());
  metrics << metrics_header() << '\n' << std::flush;
  timing << "step,wall_clock_seconds\n" << std::flush;

  RunResult result;
  result.checkpoint = ckpt.write_step(trainer);
  const auto start = std::chrono::steady_clock::now();
  TrainStats window;

  try {
    while (trainer.env_steps() < config.total_steps) {
      trainer.collect_step();
      if (trainer.env_steps() > config.warmup_steps) {
        if (const auto s = trainer.train_step()) window.accumulate(*s);
      }
      const std::int64_t step = trainer.env_steps();
      const bool last = step == config.total_steps;
      if (step % config.eval_interval == 0 || last) {
        MetricsRow row;
        row.step = step;
        row.eval = trainer.evaluate(config.eval_rollouts);
        row.train_episode_return = trainer.last_episode_return();
        if (window.updates > 0) row.stats = window.averaged();
        window = TrainStats{};
        metrics << format_metrics_row(row, config.twin_critics) << '\n' << std::flush;
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        timing << step << ',' << format_double(secs) << '\n' << std::flush;
        result.rows.push_back(row);
      }
      if (step % config.checkpoint_interval == 0 || last) result.checkpoint = ckpt.write_step(trainer);
    }
  } catch (const DivergenceError& e) {
    // Failed updates are rejected before touching parameters, so the current
    // state is the last good one.
    result.diverged = true;
    result.message = e.what();
    result.checkpoint = ckpt.write(trainer, "diverged");
  }
  result.steps = trainer.env_steps();
  return result;
}

}  // namespace idac
