#pragma once

// Toy environments with analytically known returns or optimal policies.
// All of them share the reset/step interface and are deterministic given
// their seed.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "idac/rng.hpp"

namespace idac {

struct EnvSpec {
  Index state_dim = 1;
  Index action_dim = 1;
  bool bounded = true;
  RowVector action_low;
  RowVector action_high;
  int horizon = 1;
};

struct StepResult {
  RowVector state;
  double reward = 0.0;
  bool terminal = false;   // genuine end of the task
  bool truncated = false;  // horizon reached without a terminal state
};

/// Analytic return distribution: "normal" (stddev 0 means an atom at `mean`)
/// or "optimal_return" (the exact value of the optimal policy, in `mean`).
struct OracleReturn {
  std::string family;
  double mean = 0.0;
  double stddev = 0.0;
};

class Environment {
 public:
  explicit Environment(std::uint64_t seed) : rng_(seed) {}
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual const EnvSpec& spec() const = 0;
  virtual RowVector reset() = 0;
  /// `action` is in the environment's own units (inside the action box).
  virtual StepResult step(const RowVector& action) = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
  virtual std::optional<OracleReturn> oracle() const { return std::nullopt; }

  void seed(std::uint64_t s) { rng_ = Rng(s); }

 protected:
  Rng rng_;
};

/// Action-ignoring chain of T steps; step t pays r ~ N(mu_t, sigma_t^2).
/// The state is the one-hot step index (all zeros once terminal).
class GaussianChain final : public Environment {
 public:
  GaussianChain(std::vector<double> mu, std::vector<double> sigma, double gamma, std::uint64_t seed = 0);

  std::string name() const override { return "gaussian_chain"; }
  const EnvSpec& spec() const override { return spec_; }
  RowVector reset() override;
  StepResult step(const RowVector& action) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<GaussianChain>(*this); }
  /// Return from the first state: N(sum gamma^t mu_t, sum gamma^(2t) sigma_t^2).
  std::optional<OracleReturn> oracle() const override;

 private:
  RowVector state_at(int t) const;

  std::vector<double> mu_;
  std::vector<double> sigma_;
  double gamma_;
  EnvSpec spec_;
  int t_ = 0;
};

/// One-step bandit on [-1, 1] with two equal peaks at +-0.5.
class BimodalBandit final : public Environment {
 public:
  explicit BimodalBandit(std::uint64_t seed = 0);

  static double reward(double a);

  std::string name() const override { return "bimodal_bandit"; }
  const EnvSpec& spec() const override { return spec_; }
  RowVector reset() override;
  StepResult step(const RowVector& action) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<BimodalBandit>(*this); }

 private:
  EnvSpec spec_;
};

/// 2-D point mass: s' = s + a with a in [-0.2, 0.2]^2, r = -||s'||, start
/// uniform in [-1, 1]^2, truncated after `horizon` steps.
class PointReach final : public Environment {
 public:
  explicit PointReach(int horizon = 50, std::uint64_t seed = 0);

  /// Per-axis clipped move toward the origin; minimizes every |s_i| at every
  /// step, hence optimal.
  static RowVector optimal_action(const RowVector& state);
  /// Discounted return of optimal_action from `start`.
  double optimal_return(const RowVector& start, double gamma = 1.0) const;

  std::string name() const override { return "point_reach"; }
  const EnvSpec& spec() const override { return spec_; }
  RowVector reset() override;
  StepResult step(const RowVector& action) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<PointReach>(*this); }

 private:
  EnvSpec spec_;
  RowVector pos_;
  int t_ = 0;
};

/// One-step 2-D task r = -(w (a1 - a2)^2 + (a1 + a2 - 1)^2) with optimum
/// (0.5, 0.5). For w != 1 the level sets are ellipses along the diagonal, so
/// a near-optimal stochastic policy has correlated action dimensions.
class CorrelatedAction final : public Environment {
 public:
  explicit CorrelatedAction(double anisotropy = 10.0, std::uint64_t seed = 0);

  double reward(double a1, double a2) const;

  std::string name() const override { return "correlated_action"; }
  const EnvSpec& spec() const override { return spec_; }
  RowVector reset() override;
  StepResult step(const RowVector& action) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<CorrelatedAction>(*this); }

 private:
  double anisotropy_;
  EnvSpec spec_;
};

/// Options for make_env; only the fields of the selected environment are read.
struct EnvOptions {
  std::vector<double> chain_mu = {0.5, 1.0, -0.5};
  std::vector<double> chain_sigma = {1.0, 1.0, 1.0};
  double gamma = 0.99;
  int point_reach_horizon = 50;
  double correlation_anisotropy = 10.0;
};

/// Known names: gaussian_chain, bimodal_bandit, point_reach, correlated_action.
std::unique_ptr<Environment> make_env(const std::string& name, const EnvOptions& options, std::uint64_t seed);
const std::vector<std::string>& env_names();

/// Undiscounted-by-default returns of `episodes` rollouts of `policy`.
using Policy = std::function<RowVector(const RowVector& state)>;
std::vector<double> rollout_returns(Environment& env, const Policy& policy, int episodes, double gamma = 1.0);

/// Uniform-random policy over the action box.
Policy uniform_random_policy(const EnvSpec& spec, Rng& rng);

}  // namespace idac
