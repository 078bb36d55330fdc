#include "idac/actor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "idac/errors.hpp"

namespace idac {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
// Keeps log(1 - tanh(u)^2) finite once tanh saturates.
constexpr double kSquashStab = 1e-6;

double softplus_scalar(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Matrix gaussian_log_pdf_rows(const Matrix& x, const Matrix& mu, const Matrix& sigma) {
  const auto z = ((x - mu).array() / sigma.array()).eval();
  return (-0.5 * z.square() - sigma.array().log() - kHalfLog2Pi).matrix().rowwise().sum();
}

// log |d tanh(u) / du| summed over dimensions, written in terms of a = tanh(u).
Matrix squash_log_jacobian(const Matrix& a) {
  return (1.0 - a.array().square() + kSquashStab).log().matrix().rowwise().sum();
}

Matrix keep_inside(Matrix a) {
  const double hi = std::nextafter(1.0, 0.0);
  return a.cwiseMax(-hi).cwiseMin(hi);
}

Matrix unsquash(const ActorConfig& config, const Matrix& actions) {
  if (!config.squash) return actions;
  return keep_inside(actions).array().atanh().matrix();
}

void check_aligned(const ActorParams& actor, const Matrix& states, const Matrix& xi) {
  const ActorConfig& c = actor.config;
  if (states.cols() != c.state_dim) throw InvalidArgument("actor: state width does not match the actor");
  if (xi.cols() != c.xi_dim) throw InvalidArgument("actor: xi width does not match the actor");
  if (states.rows() != xi.rows()) throw InvalidArgument("actor: state and xi row counts differ");
}

std::vector<Index> repeat_index(Index n, Index times) {
  std::vector<Index> idx(static_cast<std::size_t>(n * times));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < times; ++j) idx[i * times + j] = i;
  }
  return idx;
}

}  // namespace

std::vector<Index> ActorConfig::widths() const {
  std::vector<Index> w{state_dim + xi_dim};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(2 * action_dim);
  return w;
}

ActorParams ActorParams::init(const ActorConfig& config, Rng& rng) {
  if (config.state_dim < 1 || config.action_dim < 1 || config.xi_dim < 0) {
    throw InvalidArgument("actor dimensions must be positive (xi_dim may be 0)");
  }
  return ActorParams{config, MlpParams::uniform_init(config.widths(), rng)};
}

GaussianHeads policy_heads(const ActorParams& actor, const Matrix& states, const Matrix& xi) {
  check_aligned(actor, states, xi);
  const ActorConfig& c = actor.config;
  Matrix in(states.rows(), states.cols() + xi.cols());
  in << states, xi;
  const Matrix out = forward_mlp(actor.net, in);
  GaussianHeads h;
  h.mu = out.leftCols(c.action_dim);
  const Matrix pre = out.rightCols(c.action_dim).cwiseMax(c.pre_sigma_min).cwiseMin(c.pre_sigma_max);
  h.sigma = (pre.unaryExpr(&softplus_scalar).array() + c.sigma_floor).matrix();
  return h;
}

GaussianHeadTensors policy_heads(const ActorConfig& c, const BoundMlp& net, const ad::Tensor& states,
                                 const ad::Tensor& xi) {
  const std::array<ad::Tensor, 2> parts{states, xi};
  const ad::Tensor out = forward_mlp(net, ad::concat_cols(parts));
  GaussianHeadTensors h;
  h.mu = ad::slice_cols(out, 0, c.action_dim);
  const ad::Tensor pre = ad::clamp(ad::slice_cols(out, c.action_dim, c.action_dim), c.pre_sigma_min, c.pre_sigma_max);
  h.sigma = ad::add_scalar(ad::softplus(pre), c.sigma_floor);
  return h;
}

Matrix sample_action(const ActorParams& actor, const Matrix& states, const Matrix& xi, const Matrix& e) {
  const GaussianHeads h = policy_heads(actor, states, xi);
  if (e.rows() != h.mu.rows() || e.cols() != h.mu.cols()) throw InvalidArgument("sample_action: noise shape mismatch");
  if (!h.mu.allFinite() || !h.sigma.allFinite()) throw DivergenceError("sample_action: non-finite policy output");
  Matrix u = h.mu + e.cwiseProduct(h.sigma);
  if (!actor.config.squash) return u;
  return keep_inside(u.array().tanh().matrix());
}

Matrix mean_action(const ActorParams& actor, const Matrix& states, const Matrix& xi) {
  const GaussianHeads h = policy_heads(actor, states, xi);
  if (!h.mu.allFinite()) throw DivergenceError("mean_action: non-finite policy output");
  if (!actor.config.squash) return h.mu;
  return keep_inside(h.mu.array().tanh().matrix());
}

Matrix conditional_log_density(const ActorParams& actor, const Matrix& actions, const Matrix& states,
                               const Matrix& xi) {
  const GaussianHeads h = policy_heads(actor, states, xi);
  if (actions.rows() != h.mu.rows() || actions.cols() != h.mu.cols()) {
    throw InvalidArgument("conditional_log_density: action shape mismatch");
  }
  Matrix lp = gaussian_log_pdf_rows(unsquash(actor.config, actions), h.mu, h.sigma);
  if (actor.config.squash) lp -= squash_log_jacobian(keep_inside(actions));
  return lp;
}

Matrix mixture_log_density(const ActorParams& actor, const Matrix& actions, const Matrix& states,
                           std::span<const Matrix> xis) {
  if (xis.empty()) throw InvalidArgument("mixture_log_density: need at least one xi");
  const Index rows = actions.rows();
  const Index comps = static_cast<Index>(xis.size());
  const Matrix u = unsquash(actor.config, actions);
  Matrix lp(rows, comps);
  for (Index l = 0; l < comps; ++l) {
    const GaussianHeads h = policy_heads(actor, states, xis[l]);
    if (u.rows() != h.mu.rows() || u.cols() != h.mu.cols()) {
      throw InvalidArgument("mixture_log_density: action shape mismatch");
    }
    lp.col(l) = gaussian_log_pdf_rows(u, h.mu, h.sigma);
  }
  // Sorting each row first makes the result independent of component order.
  Matrix out(rows, 1);
  std::vector<double> v(static_cast<std::size_t>(comps));
  for (Index i = 0; i < rows; ++i) {
    for (Index l = 0; l < comps; ++l) v[l] = lp(i, l);
    std::sort(v.begin(), v.end());
    const double m = v.back();
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    out(i, 0) = m + std::log(s) - std::log(static_cast<double>(comps));
  }
  if (actor.config.squash) out -= squash_log_jacobian(keep_inside(actions));
  return out;
}

EntropyBound entropy_bound_estimate(const ActorParams& actor, const RowVector& state, int num_mixture, int draws,
                                    Rng& rng) {
  if (num_mixture < 0) throw InvalidArgument("entropy_bound_estimate: L must be >= 0");
  if (draws < 1) throw InvalidArgument("entropy_bound_estimate: need at least one draw");
  const ActorConfig& c = actor.config;
  constexpr int kChunk = 8192;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int done = 0; done < draws; done += kChunk) {
    const Index n = std::min(kChunk, draws - done);
    const Matrix s = state.replicate(n, 1);
    std::vector<Matrix> xis;
    xis.push_back(rng.normal_matrix(n, c.xi_dim));
    const Matrix e = rng.normal_matrix(n, c.action_dim);
    const Matrix a = sample_action(actor, s, xis[0], e);
    for (int l = 0; l < num_mixture; ++l) xis.push_back(rng.normal_matrix(n, c.xi_dim));
    const Matrix lp = mixture_log_density(actor, a, s, xis);
    sum += lp.sum();
    sum_sq += lp.squaredNorm();
  }
  const double m = sum / draws;
  const double var = draws > 1 ? std::max(0.0, (sum_sq - draws * m * m) / (draws - 1)) : 0.0;
  return {m, std::sqrt(var / draws)};
}

SiaNoise SiaNoise::sample(Index num_states, int num_actions, int num_mixture, Index xi_dim, Index action_dim,
                          Index eps_dim, Rng& rng) {
  if (num_actions < 1 || num_mixture < 0) throw InvalidArgument("SiaNoise: need J >= 1 and L >= 0");
  SiaNoise n;
  n.num_actions = num_actions;
  n.num_mixture = num_mixture;
  n.xi_private = rng.normal_matrix(num_states * num_actions, xi_dim);
  n.xi_shared = rng.normal_matrix(num_states * num_mixture, xi_dim);
  n.e = rng.normal_matrix(num_states * num_actions, action_dim);
  n.eps = rng.normal_matrix(num_states * num_actions, eps_dim);
  return n;
}

ActorLoss actor_loss(ad::Tape& tape, const ActorParams& actor, const CriticPair& critics, const Matrix& states,
                     const SiaNoise& noise, double alpha) {
  const ActorConfig& c = actor.config;
  const Index m = states.rows();
  const Index j_count = noise.num_actions;
  const Index l_count = noise.num_mixture;
  const Index mj = m * j_count;
  if (noise.xi_private.rows() != mj || noise.e.rows() != mj || noise.eps.rows() != mj ||
      noise.xi_shared.rows() != m * l_count) {
    throw InvalidArgument("actor_loss: noise does not match the batch size");
  }

  ActorLoss out;
  out.actor = bind(tape, actor.net, true);
  const ad::Tensor s = tape.constant(states);
  const std::vector<Index> rep_j = repeat_index(m, j_count);
  const ad::Tensor s_j = ad::gather_rows(s, rep_j);

  const GaussianHeadTensors h0 = policy_heads(c, out.actor, s_j, tape.constant(noise.xi_private));
  if (!h0.mu.value().allFinite() || !h0.sigma.value().allFinite()) {
    throw DivergenceError("actor_loss: non-finite policy output");
  }
  const ad::Tensor u = h0.mu + tape.constant(noise.e) * h0.sigma;
  out.actions = c.squash ? ad::tanh(u) : u;

  // Mixture components: l = 0 is each action's own (mu, sigma); l >= 1 are the
  // shared draws of its state. All of them are constants.
  std::vector<ad::Tensor> mu_parts{ad::stop_gradient(h0.mu)};
  std::vector<ad::Tensor> sigma_parts{ad::stop_gradient(h0.sigma)};
  if (l_count > 0) {
    const Matrix s_l = states(repeat_index(m, l_count), Eigen::all);
    const GaussianHeads hs = policy_heads(actor, s_l, noise.xi_shared);
    mu_parts.push_back(tape.constant(hs.mu));
    sigma_parts.push_back(tape.constant(hs.sigma));
  }
  out.component_mu = ad::concat_rows(mu_parts);
  out.component_sigma = ad::concat_rows(sigma_parts);

  const Index comps = l_count + 1;
  std::vector<Index> action_rows(static_cast<std::size_t>(mj * comps));
  std::vector<Index> comp_rows(action_rows.size());
  for (Index r = 0; r < mj; ++r) {
    const Index i = r / j_count;
    for (Index l = 0; l < comps; ++l) {
      action_rows[r * comps + l] = r;
      comp_rows[r * comps + l] = l == 0 ? r : mj + i * l_count + (l - 1);
    }
  }
  const ad::Tensor lp = ad::gaussian_log_pdf(ad::gather_rows(u, action_rows), ad::gather_rows(out.component_mu, comp_rows),
                                             ad::gather_rows(out.component_sigma, comp_rows));
  ad::Tensor log_mix = ad::add_scalar(ad::row_log_sum_exp(ad::reshape(lp, mj, comps)),
                                      -std::log(static_cast<double>(comps)));
  if (c.squash) {
    const ad::Tensor jac = ad::row_sum(ad::log(ad::add_scalar(ad::neg(ad::square(out.actions)), 1.0 + kSquashStab)));
    log_mix = log_mix - jac;
  }

  const ad::Tensor eps = tape.constant(noise.eps);
  ad::Tensor q;
  for (std::size_t z = 0; z < critics.count(); ++z) {
    const ad::Tensor g = critic_values(bind(tape, critics.online[z], false), s_j, out.actions, eps);
    q = z == 0 ? g : q + g;
  }
  q = ad::scale(q, 1.0 / static_cast<double>(critics.count()));

  out.loss = ad::mean(ad::neg(q) + ad::scale(log_mix, alpha));
  out.log_pi = log_mix.value();
  out.first_log_pi.resize(m, 1);
  for (Index i = 0; i < m; ++i) out.first_log_pi(i, 0) = out.log_pi(i * j_count, 0);
  return out;
}

ad::Tensor alpha_loss(const ad::Tensor& eta, const Matrix& log_pi, double target_entropy) {
  if (eta.rows() != 1 || eta.cols() != 1) throw InvalidArgument("alpha_loss: eta must be scalar");
  const Matrix excess = (-log_pi.array() - target_entropy).matrix();
  return ad::mean(ad::mul(eta, eta.tape().constant(excess)));
}

}  // namespace idac
