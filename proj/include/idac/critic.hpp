#pragma once

// Twin-delayed distributional generator critics. Each critic maps
// concat(state, action, noise) to a single return sample; K noise draws give
// an empirical return distribution for one (state, action) pair.

#include <optional>
#include <vector>

#include "idac/autodiff.hpp"
#include "idac/mlp.hpp"
#include "idac/transition.hpp"

namespace idac {

struct CriticConfig {
  Index state_dim = 1;
  Index action_dim = 1;
  Index eps_dim = 5;
  std::vector<Index> hidden = {256, 256};

  std::vector<Index> widths() const;
};

/// Online generators and their delayed copies. One entry per critic: two in
/// twin mode, one in the single-critic ablation.
struct CriticPair {
  CriticConfig config;
  std::vector<MlpParams> online;
  std::vector<MlpParams> delayed;
  double tau_smooth = 0.005;

  static CriticPair init(const CriticConfig& config, bool twin, double tau_smooth, Rng& rng);
  bool twin() const { return online.size() == 2; }
  std::size_t count() const { return online.size(); }
};

/// G(s_r, a_r, eps_r) for aligned rows; returns R x 1.
Matrix critic_values(const MlpParams& omega, const Matrix& states, const Matrix& actions, const Matrix& eps);
ad::Tensor critic_values(const BoundMlp& omega, const ad::Tensor& states, const ad::Tensor& actions,
                         const ad::Tensor& eps);

/// x_{i,k} = G(s_i, a_i, eps_{i*K+k}); eps has B*K rows, result is B x K (unsorted).
/// Throws DivergenceError on non-finite output.
Matrix generate_samples(const MlpParams& omega, const Matrix& states, const Matrix& actions, const Matrix& eps);
ad::Tensor generate_samples(const BoundMlp& omega, const ad::Tensor& states, const ad::Tensor& actions,
                            const Matrix& eps);

/// Sorted Bellman targets r + gamma (1 - done) G~_z(s', a', eps'), B x K, combined
/// with the twin sorted minimum (or just sorted for a single critic). Both
/// delayed critics see `eps_next` unless `eps_next_second` is given. The result
/// is a plain matrix, so it enters any loss as a constant.
Matrix build_targets(const CriticPair& pair, const TransitionBatch& batch, const Matrix& next_actions,
                     const Matrix& eps_next, double gamma, const Matrix* eps_next_second = nullptr);

struct CriticLoss {
  ad::Tensor total;                 // sum over critics of the batch-mean quantile loss
  std::vector<ad::Tensor> per_critic;
  std::vector<BoundMlp> online;     // tracked online parameters
  Matrix sorted_first;              // sorted samples of critic 1, B x K
};

/// Online samples from fresh `eps` (B*K rows, shared by both critics), sorted
/// per row and regressed onto `targets` with the quantile Huber loss.
CriticLoss critic_loss(ad::Tape& tape, const CriticPair& pair, const TransitionBatch& batch, const Matrix& targets,
                       const Matrix& eps, double kappa);

/// delayed <- tau * online + (1 - tau) * delayed, for every tensor of every critic.
void soft_update(CriticPair& pair);

/// Monte-Carlo Q(s, a): mean of G over the eps rows and over the critics.
double mean_value(const CriticPair& pair, const RowVector& state, const RowVector& action, const Matrix& eps);

}  // namespace idac
