#include "idac/envs.hpp"

#include <algorithm>
#include <cmath>

#include "idac/errors.hpp"

namespace idac {

namespace {
EnvSpec box_spec(Index state_dim, Index action_dim, double lo, double hi, int horizon) {
  EnvSpec s;
  s.state_dim = state_dim;
  s.action_dim = action_dim;
  s.bounded = true;
  s.action_low = RowVector::Constant(action_dim, lo);
  s.action_high = RowVector::Constant(action_dim, hi);
  s.horizon = horizon;
  return s;
}

void check_action(const EnvSpec& spec, const RowVector& a) {
  if (a.size() != spec.action_dim) throw InvalidArgument("step: action has the wrong dimension");
  if (!a.allFinite()) throw InvalidArgument("step: non-finite action");
}
}  // namespace

// ---- GaussianChain ----

GaussianChain::GaussianChain(std::vector<double> mu, std::vector<double> sigma, double gamma, std::uint64_t seed)
    : Environment(seed), mu_(std::move(mu)), sigma_(std::move(sigma)), gamma_(gamma) {
  if (mu_.empty()) throw InvalidArgument("gaussian_chain: horizon must be >= 1");
  if (mu_.size() != sigma_.size()) throw InvalidArgument("gaussian_chain: mu and sigma lengths differ");
  for (double s : sigma_) {
    if (!(s >= 0.0)) throw InvalidArgument("gaussian_chain: sigma must be non-negative");
  }
  const int t = static_cast<int>(mu_.size());
  spec_ = box_spec(t, 1, -1.0, 1.0, t);
}

RowVector GaussianChain::state_at(int t) const {
  RowVector s = RowVector::Zero(spec_.state_dim);
  if (t < spec_.state_dim) s(t) = 1.0;
  return s;
}

RowVector GaussianChain::reset() {
  t_ = 0;
  return state_at(0);
}

StepResult GaussianChain::step(const RowVector& action) {
  check_action(spec_, action);
  if (t_ >= spec_.horizon) throw InvalidArgument("gaussian_chain: step after termination");
  StepResult r;
  r.reward = mu_[t_] + sigma_[t_] * rng_.normal();
  ++t_;
  r.terminal = t_ == spec_.horizon;
  r.state = state_at(t_);
  return r;
}

std::optional<OracleReturn> GaussianChain::oracle() const {
  double m = 0.0;
  double v = 0.0;
  double g = 1.0;
  for (std::size_t t = 0; t < mu_.size(); ++t) {
    m += g * mu_[t];
    v += g * g * sigma_[t] * sigma_[t];
    g *= gamma_;
  }
  return OracleReturn{"normal", m, std::sqrt(v)};
}

// ---- BimodalBandit ----

BimodalBandit::BimodalBandit(std::uint64_t seed) : Environment(seed), spec_(box_spec(1, 1, -1.0, 1.0, 1)) {}

double BimodalBandit::reward(double a) {
  return std::exp(-(a - 0.5) * (a - 0.5) / 0.02) + std::exp(-(a + 0.5) * (a + 0.5) / 0.02);
}

RowVector BimodalBandit::reset() { return RowVector::Zero(1); }

StepResult BimodalBandit::step(const RowVector& action) {
  check_action(spec_, action);
  return StepResult{RowVector::Zero(1), reward(action(0)), true, false};
}

// ---- PointReach ----

PointReach::PointReach(int horizon, std::uint64_t seed) : Environment(seed), spec_(box_spec(2, 2, -0.2, 0.2, horizon)) {
  if (horizon < 1) throw InvalidArgument("point_reach: horizon must be >= 1");
  pos_ = RowVector::Zero(2);
}

RowVector PointReach::optimal_action(const RowVector& state) { return (-state).cwiseMax(-0.2).cwiseMin(0.2); }

double PointReach::optimal_return(const RowVector& start, double gamma) const {
  RowVector s = start;
  double ret = 0.0;
  double g = 1.0;
  for (int t = 0; t < spec_.horizon; ++t) {
    s += optimal_action(s);
    ret -= g * s.norm();
    g *= gamma;
  }
  return ret;
}

RowVector PointReach::reset() {
  t_ = 0;
  pos_ = RowVector(2);
  pos_ << rng_.uniform(-1.0, 1.0), rng_.uniform(-1.0, 1.0);
  return pos_;
}

StepResult PointReach::step(const RowVector& action) {
  check_action(spec_, action);
  pos_ += action.cwiseMax(spec_.action_low).cwiseMin(spec_.action_high);
  ++t_;
  return StepResult{pos_, -pos_.norm(), false, t_ >= spec_.horizon};
}

// ---- CorrelatedAction ----

CorrelatedAction::CorrelatedAction(double anisotropy, std::uint64_t seed)
    : Environment(seed), anisotropy_(anisotropy), spec_(box_spec(1, 2, -1.0, 1.0, 1)) {
  if (!(anisotropy > 0.0)) throw InvalidArgument("correlated_action: anisotropy must be positive");
}

double CorrelatedAction::reward(double a1, double a2) const {
  const double d = a1 - a2;
  const double s = a1 + a2 - 1.0;
  return -(anisotropy_ * d * d + s * s);
}

RowVector CorrelatedAction::reset() { return RowVector::Zero(1); }

StepResult CorrelatedAction::step(const RowVector& action) {
  check_action(spec_, action);
  return StepResult{RowVector::Zero(1), reward(action(0), action(1)), true, false};
}

// ---- registry & helpers ----

const std::vector<std::string>& env_names() {
  static const std::vector<std::string> names{"gaussian_chain", "bimodal_bandit", "point_reach", "correlated_action"};
  return names;
}

std::unique_ptr<Environment> make_env(const std::string& name, const EnvOptions& o, std::uint64_t seed) {
  if (name == "gaussian_chain") return std::make_unique<GaussianChain>(o.chain_mu, o.chain_sigma, o.gamma, seed);
  if (name == "bimodal_bandit") return std::make_unique<BimodalBandit>(seed);
  if (name == "point_reach") return std::make_unique<PointReach>(o.point_reach_horizon, seed);
  if (name == "correlated_action") return std::make_unique<CorrelatedAction>(o.correlation_anisotropy, seed);
  throw InvalidArgument("unknown environment '" + name + "'");
}

std::vector<double> rollout_returns(Environment& env, const Policy& policy, int episodes, double gamma) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(episodes));
  for (int ep = 0; ep < episodes; ++ep) {
    RowVector s = env.reset();
    double ret = 0.0;
    double g = 1.0;
    for (int t = 0; t < env.spec().horizon; ++t) {
      const StepResult r = env.step(policy(s));
      ret += g * r.reward;
      g *= gamma;
      s = r.state;
      if (r.terminal || r.truncated) break;
    }
    out.push_back(ret);
  }
  return out;
}

Policy uniform_random_policy(const EnvSpec& spec, Rng& rng) {
  return [spec, &rng](const RowVector&) {
    RowVector a(spec.action_dim);
    for (Index d = 0; d < spec.action_dim; ++d) {
      a(d) = spec.bounded ? rng.uniform(spec.action_low(d), spec.action_high(d)) : rng.normal();
    }
    return a;
  };
}

}  // namespace idac
