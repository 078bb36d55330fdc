#include "idac/critic.hpp"

#include <array>
#include <string>

#include "idac/distributional.hpp"
#include "idac/errors.hpp"

namespace idac {

std::vector<Index> CriticConfig::widths() const {
  std::vector<Index> w{state_dim + action_dim + eps_dim};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(1);
  return w;
}

CriticPair CriticPair::init(const CriticConfig& config, bool twin, double tau_smooth, Rng& rng) {
  if (!(tau_smooth >= 0.0 && tau_smooth <= 1.0)) throw InvalidArgument("tau_smooth must lie in [0, 1]");
  CriticPair pair;
  pair.config = config;
  pair.tau_smooth = tau_smooth;
  const int n = twin ? 2 : 1;
  for (int z = 0; z < n; ++z) {
    pair.online.push_back(MlpParams::uniform_init(config.widths(), rng));
    pair.delayed.push_back(pair.online.back());
  }
  return pair;
}

namespace {

void check_rows(const Matrix& s, const Matrix& a, const Matrix& eps, const char* what) {
  if (s.rows() != a.rows() || s.rows() != eps.rows()) {
    throw InvalidArgument(std::string(what) + ": state, action and noise row counts differ");
  }
}

// Stacks [s_i, a_i, eps_r] for r = i*K + k.
Matrix sample_inputs(const Matrix& states, const Matrix& actions, const Matrix& eps) {
  if (states.rows() != actions.rows()) throw InvalidArgument("generate_samples: state and action batches differ");
  const Index b = states.rows();
  if (b == 0 || eps.rows() % b != 0) throw InvalidArgument("generate_samples: noise rows must be a multiple of batch size");
  const Index k = eps.rows() / b;
  const Index ds = states.cols();
  const Index da = actions.cols();
  Matrix in(eps.rows(), ds + da + eps.cols());
  for (Index i = 0; i < b; ++i) {
    for (Index j = 0; j < k; ++j) {
      const Index r = i * k + j;
      in.block(r, 0, 1, ds) = states.row(i);
      in.block(r, ds, 1, da) = actions.row(i);
    }
  }
  in.rightCols(eps.cols()) = eps;
  return in;
}

std::vector<Index> repeat_rows(Index b, Index k) {
  std::vector<Index> idx(static_cast<std::size_t>(b * k));
  for (Index i = 0; i < b; ++i) {
    for (Index j = 0; j < k; ++j) idx[i * k + j] = i;
  }
  return idx;
}

}  // namespace

Matrix critic_values(const MlpParams& omega, const Matrix& states, const Matrix& actions, const Matrix& eps) {
  check_rows(states, actions, eps, "critic_values");
  Matrix in(states.rows(), states.cols() + actions.cols() + eps.cols());
  in << states, actions, eps;
  return forward_mlp(omega, in);
}

ad::Tensor critic_values(const BoundMlp& omega, const ad::Tensor& states, const ad::Tensor& actions,
                         const ad::Tensor& eps) {
  check_rows(states.value(), actions.value(), eps.value(), "critic_values");
  const std::array<ad::Tensor, 3> parts{states, actions, eps};
  return forward_mlp(omega, ad::concat_cols(parts));
}

Matrix generate_samples(const MlpParams& omega, const Matrix& states, const Matrix& actions, const Matrix& eps) {
  const Matrix out = forward_mlp(omega, sample_inputs(states, actions, eps));
  if (!out.allFinite()) throw DivergenceError("generate_samples: non-finite generator output");
  const Index b = states.rows();
  return Eigen::Map<const Matrix>(out.data(), b, out.rows() / b);
}

ad::Tensor generate_samples(const BoundMlp& omega, const ad::Tensor& states, const ad::Tensor& actions,
                            const Matrix& eps) {
  const Index b = states.rows();
  if (actions.rows() != b) throw InvalidArgument("generate_samples: state and action batches differ");
  if (b == 0 || eps.rows() % b != 0) throw InvalidArgument("generate_samples: noise rows must be a multiple of batch size");
  const Index k = eps.rows() / b;
  const std::vector<Index> idx = repeat_rows(b, k);
  ad::Tape& tape = states.tape();
  const std::array<ad::Tensor, 3> parts{ad::gather_rows(states, idx), ad::gather_rows(actions, idx),
                                        tape.constant(eps)};
  ad::Tensor out = forward_mlp(omega, ad::concat_cols(parts));
  if (!out.value().allFinite()) throw DivergenceError("generate_samples: non-finite generator output");
  return ad::reshape(out, b, k);
}

Matrix build_targets(const CriticPair& pair, const TransitionBatch& batch, const Matrix& next_actions,
                     const Matrix& eps_next, double gamma, const Matrix* eps_next_second) {
  const Index b = batch.size();
  if (batch.rewards.rows() != b || batch.dones.rows() != b || batch.next_states.rows() != b ||
      next_actions.rows() != b) {
    throw InvalidArgument("build_targets: batch shapes differ");
  }
  if (eps_next_second != nullptr && eps_next_second->rows() != eps_next.rows()) {
    throw InvalidArgument("build_targets: noise sets differ in size");
  }
  const Matrix mask = (1.0 - batch.dones.array()).matrix() * gamma;  // B x 1
  Matrix combined;
  for (std::size_t z = 0; z < pair.count(); ++z) {
    const Matrix& eps = (z == 1 && eps_next_second != nullptr) ? *eps_next_second : eps_next;
    Matrix y = generate_samples(pair.delayed[z], batch.next_states, next_actions, eps);
    for (Index i = 0; i < b; ++i) y.row(i) = (y.row(i).array() * mask(i, 0) + batch.rewards(i, 0)).matrix();
    y = dist::sort_rows(y);
    combined = z == 0 ? std::move(y) : Matrix(combined.cwiseMin(y));
  }
  return combined;
}

CriticLoss critic_loss(ad::Tape& tape, const CriticPair& pair, const TransitionBatch& batch, const Matrix& targets,
                       const Matrix& eps, double kappa) {
  CriticLoss out;
  const ad::Tensor s = tape.constant(batch.states);
  const ad::Tensor a = tape.constant(batch.actions);
  for (std::size_t z = 0; z < pair.count(); ++z) {
    out.online.push_back(bind(tape, pair.online[z], true));
    const ad::Tensor x = ad::sort_rows(generate_samples(out.online.back(), s, a, eps));
    if (z == 0) out.sorted_first = x.value();
    out.per_critic.push_back(dist::quantile_huber_loss(x, targets, kappa));
    out.total = z == 0 ? out.per_critic.back() : ad::add(out.total, out.per_critic.back());
  }
  return out;
}

void soft_update(CriticPair& pair) {
  const double tau = pair.tau_smooth;
  for (std::size_t z = 0; z < pair.count(); ++z) {
    for (std::size_t t = 0; t < pair.online[z].tensors.size(); ++t) {
      Matrix& d = pair.delayed[z].tensors[t];
      d = tau * pair.online[z].tensors[t] + (1.0 - tau) * d;
    }
  }
}

double mean_value(const CriticPair& pair, const RowVector& state, const RowVector& action, const Matrix& eps) {
  if (eps.rows() < 1) throw InvalidArgument("mean_value: need at least one noise draw");
  const Matrix s = state.replicate(eps.rows(), 1);
  const Matrix a = action.replicate(eps.rows(), 1);
  double acc = 0.0;
  for (const MlpParams& omega : pair.online) acc += critic_values(omega, s, a, eps).mean();
  return acc / static_cast<double>(pair.count());
}

}  // namespace idac
