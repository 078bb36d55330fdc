// idac: train / eval / diag front end.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 training divergence.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "idac/alloc_tuning.hpp"
#include "idac/checkpoint.hpp"
#include "idac/config.hpp"
#include "idac/diag.hpp"
#include "idac/errors.hpp"
#include "idac/trainer.hpp"

namespace fs = std::filesystem;
using namespace idac;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kDiverged = 2;

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out) {
  // Parse everything before touching the filesystem, so a bad config leaves no trace.
  TrainerConfig cfg = load_config(config_path);
  if (seed) cfg.seed = *seed;
  const fs::path dir = out.empty() ? fs::path(cfg.output_dir) / cfg.run_id : fs::path(out);
  const RunResult r = run(cfg, dir);
  if (r.diverged) {
    std::cerr << "idac: training diverged at step " << r.steps << ": " << r.message << "\n"
              << "idac: last good state saved to " << r.checkpoint.string() << "\n";
    return kDiverged;
  }
  std::cout << "trained " << r.steps << " steps into " << dir.string() << "\n";
  if (!r.rows.empty()) {
    const MetricsRow& last = r.rows.back();
    std::cout << "final eval return " << format_double(last.eval.mean) << " +/- " << format_double(last.eval.stddev)
              << "\n";
  }
  std::cout << "checkpoint " << r.checkpoint.string() << "\n";
  return kOk;
}

std::unique_ptr<Environment> env_for(const Checkpoint& ckpt, const std::string& name, std::uint64_t seed) {
  std::unique_ptr<Environment> env = make_env(name, ckpt.config.env_options, seed);
  const EnvSpec& spec = env->spec();
  if (spec.state_dim != ckpt.actor.config.state_dim || spec.action_dim != ckpt.actor.config.action_dim) {
    throw InvalidArgument("environment '" + name + "' does not match the checkpoint's state/action dimensions");
  }
  return env;
}

int cmd_eval(const std::string& ckpt_path, const std::string& env_name, int rollouts, bool as_json,
             std::uint64_t seed) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const auto env = env_for(ckpt, env_name, seed);
  const EvalResult r = evaluate(ckpt.actor, *env, rollouts, seed);
  if (as_json) {
    const nlohmann::json j{{"env", env_name}, {"step", ckpt.step}, {"rollouts", rollouts},
                           {"mean", r.mean},  {"std", r.stddev},   {"returns", r.returns}};
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "return " << format_double(r.mean) << " +/- " << format_double(r.stddev) << " over " << rollouts
              << " rollouts\n";
  }
  return kOk;
}

int cmd_diag(const std::string& ckpt_path, const std::string& env_name, const std::string& mode, int state_index,
             std::uint64_t seed, std::optional<int> samples, const std::string& out) {
  if (mode != "policy_samples" && mode != "quantile_match" && mode != "entropy_curve") {
    throw CLI::ValidationError("--mode", "unknown mode '" + mode + "'");
  }
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const auto env = env_for(ckpt, env_name, seed);
  // Checkpoints live in <run>/checkpoints/, diagnostics go next to them in <run>/diag/.
  const fs::path dir = out.empty() ? fs::absolute(ckpt_path).parent_path().parent_path() / "diag" : fs::path(out);
  const diag::Probe p = diag::probe(*env, ckpt.actor, state_index, seed);
  Rng rng = Rng::derive(seed, 2);

  if (mode == "policy_samples") {
    const diag::PolicySamples s = diag::policy_samples(ckpt.actor, env->spec(), p.state, samples.value_or(1000), rng);
    diag::write_policy_samples(s, dir);
    for (Index i = 0; i < s.actions.cols(); ++i) {
      std::cout << "a" << i << ": mean " << format_double(s.mean(i)) << " std " << format_double(s.stddev(i))
                << " skewness " << format_double(s.skewness(i)) << " excess_kurtosis "
                << format_double(s.excess_kurtosis(i)) << "\n";
    }
    for (Index i = 0; i < s.actions.cols(); ++i) {
      for (Index j = i + 1; j < s.actions.cols(); ++j) {
        std::cout << "pearson(a" << i << ", a" << j << ") r " << format_double(s.pearson_r(i, j)) << " p "
                  << format_double(s.pearson_p(i, j)) << "\n";
      }
    }
  } else if (mode == "quantile_match") {
    const diag::QuantileMatch q = diag::quantile_match(ckpt.critics, ckpt.actor, *p.env, p.state, state_index == 0,
                                                       ckpt.config.gamma, samples.value_or(10000), rng);
    diag::write_quantile_match(q, dir);
    std::cout << "w1 " << format_double(q.w1) << "\n";
    if (q.oracle_w1) {
      std::cout << "oracle N(" << format_double(*q.oracle_mean) << ", " << format_double(*q.oracle_std)
                << "^2) w1 " << format_double(*q.oracle_w1) << "\n";
    }
  } else {
    const auto curve =
        diag::entropy_curve(ckpt.actor, p.state, diag::default_entropy_levels(), samples.value_or(10000), rng);
    diag::write_entropy_curve(curve, dir);
    for (const auto& pt : curve) {
      std::cout << "L " << pt.num_mixture << " H " << format_double(pt.estimate) << " se "
                << format_double(pt.std_error) << "\n";
    }
  }
  std::cout << "wrote " << (dir / (mode + ".csv")).string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Implicit distributional actor-critic trainer"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> train_seed;
  std::string train_out;
  CLI::App* train = app.add_subcommand("train", "Train from a config file");
  train->add_option("--config", config_path, "Run config (key = value lines)")->required();
  train->add_option("--seed", train_seed, "Overrides the config seed");
  train->add_option("--out", train_out, "Output directory (default: output_dir/run_id)");

  std::string ckpt_path;
  std::string env_name;
  int rollouts = 5;
  bool as_json = false;
  std::uint64_t seed = 0;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint's deterministic policy");
  eval->add_option("--ckpt", ckpt_path, "Checkpoint file")->required();
  eval->add_option("--env", env_name, "Environment name")->required();
  eval->add_option("--rollouts", rollouts, "Number of rollouts")->check(CLI::PositiveNumber);
  eval->add_flag("--json", as_json, "Print a one-line JSON summary");
  eval->add_option("--seed", seed, "Evaluation seed");

  std::string mode;
  int state_index = 0;
  std::optional<int> samples;
  std::string diag_out;
  CLI::App* diag_cmd = app.add_subcommand("diag", "Write a diagnostic CSV for a checkpoint");
  diag_cmd->add_option("--ckpt", ckpt_path, "Checkpoint file")->required();
  diag_cmd->add_option("--env", env_name, "Environment name")->required();
  diag_cmd->add_option("--mode", mode, "policy_samples | quantile_match | entropy_curve")->required();
  diag_cmd->add_option("--state-index", state_index, "Probe the state reached after N policy steps")
      ->check(CLI::NonNegativeNumber);
  diag_cmd->add_option("--seed", seed, "Diagnostic seed");
  diag_cmd->add_option("--samples", samples, "Sample count (actions, return samples or entropy draws)")
      ->check(CLI::PositiveNumber);
  diag_cmd->add_option("--out", diag_out, "Output directory (default: <run>/diag)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (train->parsed()) return cmd_train(config_path, train_seed, train_out);
    if (eval->parsed()) return cmd_eval(ckpt_path, env_name, rollouts, as_json, seed);
    return cmd_diag(ckpt_path, env_name, mode, state_index, seed, samples, diag_out);
  } catch (const CLI::ParseError& e) {
    std::cerr << "idac: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "idac: config error: " << e.what() << "\n";
    return kUsage;
  } catch (const CheckpointError& e) {
    std::cerr << "idac: checkpoint error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "idac: " << e.what() << "\n";
    return kUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "idac: diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "idac: error: " << e.what() << "\n";
    return kUsage;
  }
}
