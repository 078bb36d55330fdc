#pragma once

// Semi-implicit actor (SIA).
//
// pi(a|s) = E_xi[ N(a; mu(s, xi), diag sigma(s, xi)^2) ], xi ~ N(0, I).
//
// One MLP maps concat(s, xi) to [mu | pre_sigma]; sigma = softplus(clamp(pre_sigma))
// + sigma_floor. With `squash` the Gaussian variable u is passed through tanh so
// actions live in (-1, 1)^d; densities then include the tanh Jacobian. The
// environment-specific affine rescaling to the action box happens outside the
// policy, so densities and entropies are measured in the normalized space.
// xi_dim == 0 gives the plain diagonal-Gaussian policy.

#include <span>
#include <vector>

#include "idac/autodiff.hpp"
#include "idac/critic.hpp"
#include "idac/mlp.hpp"

namespace idac {

struct ActorConfig {
  Index state_dim = 1;
  Index action_dim = 1;
  Index xi_dim = 5;
  std::vector<Index> hidden = {256, 256};
  bool squash = true;
  double sigma_floor = 1e-3;
  double pre_sigma_min = -10.0;
  double pre_sigma_max = 6.0;

  std::vector<Index> widths() const;
};

struct ActorParams {
  ActorConfig config;
  MlpParams net;

  static ActorParams init(const ActorConfig& config, Rng& rng);
};

/// Per-row Gaussian parameters.
struct GaussianHeads {
  Matrix mu;
  Matrix sigma;
};

struct GaussianHeadTensors {
  ad::Tensor mu;
  ad::Tensor sigma;
};

GaussianHeads policy_heads(const ActorParams& actor, const Matrix& states, const Matrix& xi);
GaussianHeadTensors policy_heads(const ActorConfig& config, const BoundMlp& net, const ad::Tensor& states,
                                 const ad::Tensor& xi);

/// a = mu + e * sigma (then tanh when squashing). Rows of states, xi, e align.
/// Squashed actions are kept strictly inside (-1, 1). Throws DivergenceError on
/// non-finite network output.
Matrix sample_action(const ActorParams& actor, const Matrix& states, const Matrix& xi, const Matrix& e);

/// Deterministic evaluation action: mu(s, xi), squashed when applicable.
Matrix mean_action(const ActorParams& actor, const Matrix& states, const Matrix& xi);

/// log pi(a | s, xi) per row, R x 1.
Matrix conditional_log_density(const ActorParams& actor, const Matrix& actions, const Matrix& states,
                               const Matrix& xi);

/// log[(1/(L+1)) sum_l pi(a | s, xi^(l))] per row, via log-sum-exp. `xis` holds
/// the L+1 noise matrices, each aligned with the rows of `actions`.
Matrix mixture_log_density(const ActorParams& actor, const Matrix& actions, const Matrix& states,
                           std::span<const Matrix> xis);

struct EntropyBound {
  double value = 0.0;      // estimate of H_L (an upper bound on the negative entropy)
  double std_error = 0.0;
};

/// Monte-Carlo estimate of H_L at one state from `draws` samples
/// a ~ pi(.|s, xi^(0)) with fresh xi^(0..L) per draw.
EntropyBound entropy_bound_estimate(const ActorParams& actor, const RowVector& state, int num_mixture,
                                    int draws, Rng& rng);

/// Noise for one actor update over M states: J actions per state with private
/// xi^(0)_j, L mixture noises xi^(1..L) shared by all J actions of a state,
/// reparameterization noise e_j and critic noise eps_j. Rows are state-major
/// (row i*J + j, resp. i*L + l).
struct SiaNoise {
  int num_actions = 1;   // J
  int num_mixture = 0;   // L
  Matrix xi_private;     // M*J x xi_dim
  Matrix xi_shared;      // M*L x xi_dim
  Matrix e;              // M*J x action_dim
  Matrix eps;            // M*J x eps_dim

  static SiaNoise sample(Index num_states, int num_actions, int num_mixture, Index xi_dim, Index action_dim,
                         Index eps_dim, Rng& rng);
};

struct ActorLoss {
  ad::Tensor loss;
  BoundMlp actor;              // tracked actor parameters
  ad::Tensor actions;          // reparameterized actions, M*J x action_dim
  ad::Tensor component_mu;     // stop-gradient mixture components, (M*J + M*L) x action_dim
  ad::Tensor component_sigma;
  Matrix log_pi;               // mixture log-densities of all actions, M*J x 1
  Matrix first_log_pi;         // log-densities of the j = 0 action of each state, M x 1
};

/// Upper-bound objective
///   mean_{i,j} [ -Qbar(s_i, a_ij, eps_ij) + alpha * log mixture(a_ij) ]
/// with Qbar the mean of the online critics (held constant). Mixture
/// components are stop-gradient, so theta receives gradient only through the
/// reparameterized actions.
ActorLoss actor_loss(ad::Tape& tape, const ActorParams& actor, const CriticPair& critics, const Matrix& states,
                     const SiaNoise& noise, double alpha);

/// eta * mean(-log_pi - target_entropy) with log_pi constant; returns 1x1.
ad::Tensor alpha_loss(const ad::Tensor& eta, const Matrix& log_pi, double target_entropy);

}  // namespace idac
