#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "idac/actor.hpp"
#include "idac/adam.hpp"
#include "idac/errors.hpp"
#include "gradient_cases.hpp"
#include "models.hpp"

namespace idac {
namespace {

using testing::constant_critics;
using testing::linear_actor;

constexpr double kHalfLog2Pi = 0.918938533204673;
constexpr double kUnitGaussianNegEntropy = -1.418938533204673;  // -0.5 log(2 pi e)

double normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

TEST(ConditionalDensity, StandardNormalAtOrigin) {
  const ActorParams one = linear_actor(1, 1, 1, 0.0, 0.0, 1.0, false);
  EXPECT_NEAR(conditional_log_density(one, scalar(0.0), scalar(0.0), scalar(0.3))(0, 0), -kHalfLog2Pi, 1e-9);
  const ActorParams two = linear_actor(1, 2, 1, 0.0, 0.0, 1.0, false);
  EXPECT_NEAR(conditional_log_density(two, Matrix::Zero(1, 2), scalar(0.0), scalar(0.3))(0, 0), -2.0 * kHalfLog2Pi,
              1e-9);
}

TEST(ConditionalDensity, MatchesGaussianAwayFromMean) {
  const ActorParams a = linear_actor(2, 1, 1, 1.0, 0.5, 0.7, false);
  Matrix s(1, 2);
  s << 4.0, -3.0;  // state weights are zero
  const double xi = -0.2;
  const double expected = std::log(normal_pdf(1.1, 0.5 + xi, 0.7));
  EXPECT_NEAR(conditional_log_density(a, scalar(1.1), s, scalar(xi))(0, 0), expected, 1e-9);
}

TEST(ConditionalDensity, SquashedIncludesJacobian) {
  const ActorParams a = linear_actor(1, 1, 1, 0.0, 0.2, 0.5, true);
  const double act = 0.6;
  const double u = std::atanh(act);
  const double expected = std::log(normal_pdf(u, 0.2, 0.5)) - std::log(1.0 - act * act + 1e-6);
  EXPECT_NEAR(conditional_log_density(a, scalar(act), scalar(0.0), scalar(0.0))(0, 0), expected, 1e-9);
}

TEST(MixtureDensity, TwoComponentHandValue) {
  const ActorParams a = linear_actor(1, 1, 1, 1.0, 0.0, 1.0, false);
  const std::vector<Matrix> xis{scalar(0.0), scalar(1.0)};
  const double expected = std::log(0.5 * (normal_pdf(0, 0, 1) + normal_pdf(0, 1, 1)));
  EXPECT_NEAR(expected, -1.1380087, 1e-6);
  EXPECT_NEAR(mixture_log_density(a, scalar(0.0), scalar(0.0), xis)(0, 0), expected, 1e-9);
}

TEST(MixtureDensity, SingleComponentAndIdenticalNoiseReduceToConditional) {
  Rng rng(2);
  ActorConfig c;
  c.state_dim = 3;
  c.action_dim = 2;
  c.xi_dim = 4;
  c.hidden = {16, 16};
  const ActorParams a = ActorParams::init(c, rng);
  const Matrix s = rng.normal_matrix(6, 3);
  const Matrix xi = rng.normal_matrix(6, 4);
  const Matrix act = sample_action(a, s, xi, rng.normal_matrix(6, 2));
  const Matrix cond = conditional_log_density(a, act, s, xi);
  EXPECT_TRUE(mixture_log_density(a, act, s, std::vector<Matrix>{xi}).isApprox(cond, 1e-12));
  const std::vector<Matrix> same(7, xi);
  EXPECT_TRUE(mixture_log_density(a, act, s, same).isApprox(cond, 1e-12));
}

TEST(MixtureDensity, InvariantToComponentOrder) {
  Rng rng(3);
  ActorConfig c;
  c.state_dim = 2;
  c.action_dim = 2;
  c.xi_dim = 3;
  c.hidden = {8};
  const ActorParams a = ActorParams::init(c, rng);
  const Matrix s = rng.normal_matrix(5, 2);
  std::vector<Matrix> xis;
  for (int l = 0; l < 4; ++l) xis.push_back(rng.normal_matrix(5, 3));
  const Matrix act = sample_action(a, s, xis[0], rng.normal_matrix(5, 2));
  const Matrix base = mixture_log_density(a, act, s, xis);
  std::vector<Matrix> shuffled{xis[2], xis[0], xis[3], xis[1]};
  EXPECT_TRUE(mixture_log_density(a, act, s, shuffled).isApprox(base, 1e-12));
}

TEST(MixtureDensity, SquashedDensityIntegratesToOne) {
  const ActorParams a = linear_actor(1, 1, 1, 0.8, 0.3, 0.6, true);
  const std::vector<Matrix> xis{scalar(-1.0), scalar(0.4), scalar(1.7)};
  // Substitute a = tanh(u): the integral of p(a) da becomes p(tanh u) (1 - tanh^2 u) du.
  const int n = 40000;
  const double lo = -9.0, hi = 9.0, h = (hi - lo) / n;
  double total = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double u = lo + i * h;
    const double act = std::tanh(u);
    if (std::abs(act) >= 1.0) continue;
    const double p = std::exp(mixture_log_density(a, scalar(act), scalar(0.0), xis)(0, 0));
    total += (i == 0 || i == n ? 0.5 : 1.0) * p * (1.0 - act * act) * h;
  }
  EXPECT_NEAR(total, 1.0, 1e-4);
}

TEST(SampleAction, ZeroNoiseGivesMean) {
  const ActorParams a = linear_actor(1, 2, 1, 1.0, 0.25, 0.5, false);
  const Matrix act = sample_action(a, scalar(0.0), scalar(0.5), Matrix::Zero(1, 2));
  EXPECT_DOUBLE_EQ(act(0, 0), 0.75);
  EXPECT_DOUBLE_EQ(act(0, 1), 0.75);
  EXPECT_EQ(act, mean_action(a, scalar(0.0), scalar(0.5)));
}

TEST(SampleAction, ZeroNetworkUsesFloorOffset) {
  ActorConfig c;
  c.state_dim = 1;
  c.action_dim = 1;
  c.xi_dim = 2;
  c.hidden = {4};
  c.squash = false;
  const ActorParams a{c, MlpParams::zeros(c.widths())};
  const Matrix act = sample_action(a, scalar(0.0), Matrix::Zero(1, 2), scalar(1.0));
  EXPECT_NEAR(act(0, 0), std::log(2.0) + 1e-3, 1e-12);
}

TEST(SampleAction, DeterministicForFixedSeed) {
  ActorConfig c;
  c.state_dim = 2;
  c.action_dim = 2;
  c.xi_dim = 3;
  c.hidden = {8};
  const auto draw = [&] {
    Rng rng(77);
    const ActorParams a = ActorParams::init(c, rng);
    return sample_action(a, rng.normal_matrix(4, 2), rng.normal_matrix(4, 3), rng.normal_matrix(4, 2));
  };
  EXPECT_EQ(draw(), draw());
}

TEST(SampleAction, SquashedActionsStayStrictlyInside) {
  const ActorParams a = linear_actor(1, 2, 1, 0.0, 50.0, 1.0, true);
  const Matrix act = sample_action(a, Matrix::Zero(3, 1), Matrix::Zero(3, 1), Matrix::Zero(3, 2));
  EXPECT_LT(act.maxCoeff(), 1.0);
  EXPECT_TRUE(conditional_log_density(a, act, Matrix::Zero(3, 1), Matrix::Zero(3, 1)).allFinite());
  const ActorParams b = linear_actor(1, 2, 1, 0.0, -50.0, 1.0, true);
  EXPECT_GT(sample_action(b, Matrix::Zero(3, 1), Matrix::Zero(3, 1), Matrix::Zero(3, 2)).minCoeff(), -1.0);
}

TEST(SampleAction, RejectsMismatchedNoise) {
  const ActorParams a = linear_actor(1, 2, 1, 0.0, 0.0, 1.0, false);
  EXPECT_THROW(sample_action(a, scalar(0.0), scalar(0.0), Matrix::Zero(1, 3)), InvalidArgument);
  EXPECT_THROW(sample_action(a, scalar(0.0), Matrix::Zero(1, 2), Matrix::Zero(1, 2)), InvalidArgument);
}

TEST(SampleAction, NonFiniteOutputIsDivergence) {
  ActorParams a = linear_actor(1, 1, 1, 0.0, 0.0, 1.0, false);
  a.net.bias(0)(0, 0) = std::nan("");
  EXPECT_THROW(sample_action(a, scalar(0.0), scalar(0.0), scalar(0.0)), DivergenceError);
}

TEST(SigmaHead, ClampedAndFloored) {
  ActorParams a = linear_actor(1, 1, 1, 0.0, 0.0, 1.0, false);
  a.net.bias(0)(0, 1) = -1000.0;
  EXPECT_NEAR(policy_heads(a, scalar(0.0), scalar(0.0)).sigma(0, 0), std::log1p(std::exp(-10.0)) + 1e-3, 1e-15);
  a.net.bias(0)(0, 1) = 1000.0;
  EXPECT_NEAR(policy_heads(a, scalar(0.0), scalar(0.0)).sigma(0, 0), std::log1p(std::exp(6.0)) + 1e-3, 1e-12);
}

TEST(EntropyBound, UnitGaussianForEveryMixtureSize) {
  const ActorParams a = linear_actor(1, 1, 3, 0.0, 0.0, 1.0, false);
  Rng rng(21);
  for (int l : {0, 1, 5, 20}) {
    const EntropyBound b = entropy_bound_estimate(a, RowVector::Zero(1), l, 100000, rng);
    EXPECT_NEAR(b.value, kUnitGaussianNegEntropy, 4.0 * b.std_error) << "L " << l;
    EXPECT_LT(b.std_error, 0.005);
  }
}

TEST(EntropyBound, DecreasesWithMixtureSizeTowardMarginal) {
  // mu = xi, sigma = 1: the marginal is N(0, 2).
  const double marginal = kUnitGaussianNegEntropy - 0.5 * std::log(2.0);
  const ActorParams a = linear_actor(1, 1, 1, 1.0, 0.0, 1.0, false);
  Rng rng(5);
  double prev = 1e9;
  double prev_se = 0.0;
  for (int l : {0, 1, 5, 20, 100}) {
    const EntropyBound b = entropy_bound_estimate(a, RowVector::Zero(1), l, 100000, rng);
    EXPECT_LT(b.value, prev + 3.0 * std::hypot(b.std_error, prev_se)) << "L " << l;
    EXPECT_GT(b.value, marginal - 3.0 * b.std_error) << "L " << l;
    prev = b.value;
    prev_se = b.std_error;
  }
  EXPECT_NEAR(prev, marginal, 0.02);
}

// ---- actor loss ----

using LossFixture = testing::ActorLossFixture;

LossFixture small_problem(std::uint64_t seed, bool squash, int j, int l) {
  return testing::actor_loss_fixture(seed, squash, j, l);
}

double pinned_loss(const LossFixture& f, const ActorParams& theta, const ActorParams& frozen, double alpha) {
  return testing::pinned_actor_loss(f, theta, frozen, alpha);
}

TEST(ActorLoss, ValueMatchesIndependentComputation) {
  for (bool squash : {false, true}) {
    const LossFixture f = small_problem(4, squash, 3, 2);
    ad::Tape tape;
    const ActorLoss out = actor_loss(tape, f.actor, f.critics, f.states, f.noise, 0.3);
    EXPECT_NEAR(out.loss.item(), pinned_loss(f, f.actor, f.actor, 0.3), 1e-10) << squash;
    EXPECT_EQ(out.log_pi.rows(), 9);
    EXPECT_EQ(out.first_log_pi.rows(), 3);
    EXPECT_EQ(out.first_log_pi(1, 0), out.log_pi(3, 0));
  }
}

TEST(ActorLoss, GradientMatchesFiniteDifferencesWithPinnedComponents) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    EXPECT_LT(testing::actor_loss_gradient_error(seed), 1e-4) << "seed " << seed;
  }
}

TEST(ActorLoss, ComponentsReceiveNoGradient) {
  const LossFixture f = small_problem(8, true, 2, 2);
  ad::Tape tape;
  const ActorLoss out = actor_loss(tape, f.actor, f.critics, f.states, f.noise, 1.0);
  tape.backward(out.loss);
  EXPECT_FALSE(tape.reached(out.component_mu));
  EXPECT_FALSE(tape.reached(out.component_sigma));
  EXPECT_TRUE(tape.reached(out.actions));
}

TEST(ActorLoss, ZeroAlphaZeroCriticsGivesZeroLossAndGradient) {
  LossFixture f = small_problem(9, true, 2, 2);
  f.critics = constant_critics(f.critics.config, {0.0, 0.0});
  ad::Tape tape;
  const ActorLoss out = actor_loss(tape, f.actor, f.critics, f.states, f.noise, 0.0);
  EXPECT_EQ(out.loss.item(), 0.0);
  tape.backward(out.loss);
  for (const Matrix& g : tape.grads(out.actor.tensors)) EXPECT_TRUE(g.isZero(0.0));
}

TEST(ActorLoss, ZeroAlphaIsNegativeMeanCriticValue) {
  const LossFixture f = small_problem(10, false, 3, 1);
  ad::Tape tape;
  const ActorLoss out = actor_loss(tape, f.actor, f.critics, f.states, f.noise, 0.0);
  const Matrix act = out.actions.value();
  Matrix s_j(9, 2);
  for (Index r = 0; r < 9; ++r) s_j.row(r) = f.states.row(r / 3);
  const Matrix q1 = critic_values(f.critics.online[0], s_j, act, f.noise.eps);
  const Matrix q2 = critic_values(f.critics.online[1], s_j, act, f.noise.eps);
  EXPECT_NEAR(out.loss.item(), -0.5 * (q1 + q2).mean(), 1e-12);
}

TEST(ActorLoss, PeakedCriticPullsMeanTowardPeak) {
  // Q(s, a) = -|a - 1| built from two ReLUs; no entropy term.
  CriticConfig cc;
  cc.state_dim = 1;
  cc.action_dim = 1;
  cc.eps_dim = 1;
  cc.hidden = {2};
  MlpParams q = MlpParams::zeros(cc.widths());
  q.weight(0)(1, 0) = 1.0;
  q.bias(0)(0, 0) = -1.0;
  q.weight(0)(1, 1) = -1.0;
  q.bias(0)(0, 1) = 1.0;
  q.weight(1)(0, 0) = -1.0;
  q.weight(1)(1, 0) = -1.0;
  CriticPair critics{cc, {q}, {q}, 0.005};

  ActorParams actor = linear_actor(1, 1, 1, 0.0, -1.0, 0.05, false);
  AdamState opt = AdamState::for_params(actor.net.tensors, AdamConfig{0.01});
  Rng rng(1);
  for (int it = 0; it < 500; ++it) {
    const SiaNoise noise = SiaNoise::sample(8, 4, 0, 1, 1, 1, rng);
    ad::Tape tape;
    const ActorLoss out = actor_loss(tape, actor, critics, Matrix::Zero(8, 1), noise, 0.0);
    tape.backward(out.loss);
    adam_step(opt, actor.net.tensors, tape.grads(out.actor.tensors));
  }
  EXPECT_NEAR(policy_heads(actor, scalar(0.0), scalar(0.0)).mu(0, 0), 1.0, 0.1);
}

TEST(ActorLoss, RejectsMismatchedNoise) {
  const LossFixture f = small_problem(11, true, 2, 2);
  ad::Tape tape;
  EXPECT_THROW(actor_loss(tape, f.actor, f.critics, Matrix::Zero(4, 2), f.noise, 1.0), InvalidArgument);
}

TEST(AlphaLoss, Signs) {
  const double target = -1.0;
  const auto grad_for = [&](double log_pi) {
    ad::Tape tape;
    const ad::Tensor eta = tape.variable(scalar(0.2));
    tape.backward(alpha_loss(eta, Matrix::Constant(4, 1, log_pi), target));
    return tape.grad(eta)(0, 0);
  };
  EXPECT_EQ(grad_for(1.0), 0.0);   // -log pi equals the target
  EXPECT_GT(grad_for(-3.0), 0.0);  // entropy above target: eta decreases under descent
  EXPECT_LT(grad_for(3.0), 0.0);   // entropy below target: alpha grows
  EXPECT_DOUBLE_EQ(grad_for(-3.0), 4.0);  // mean(3 - (-1))
}

}  // namespace
}  // namespace idac
