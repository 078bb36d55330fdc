#pragma once

// Hand-wired networks with known outputs, used as oracles across tests.

#include <cmath>

#include "idac/actor.hpp"
#include "idac/critic.hpp"

namespace idac::testing {

/// Bias that makes softplus(b) + floor equal to `sigma`.
inline double pre_sigma_for(double sigma, double floor = 1e-3) { return std::log(std::expm1(sigma - floor)); }

/// No hidden layers: mu = xi_weight * xi_0 + mu_bias (per action dim), fixed sigma.
inline ActorParams linear_actor(Index state_dim, Index action_dim, Index xi_dim, double xi_weight, double mu_bias,
                                double sigma, bool squash) {
  ActorConfig c;
  c.state_dim = state_dim;
  c.action_dim = action_dim;
  c.xi_dim = xi_dim;
  c.hidden = {};
  c.squash = squash;
  ActorParams a{c, MlpParams::zeros(c.widths())};
  for (Index d = 0; d < action_dim; ++d) {
    if (xi_dim > 0) a.net.weight(0)(state_dim, d) = xi_weight;
    a.net.bias(0)(0, d) = mu_bias;
    a.net.bias(0)(0, action_dim + d) = pre_sigma_for(sigma, c.sigma_floor);
  }
  return a;
}

/// Critics whose every output is the constant `value[z]`.
inline CriticPair constant_critics(const CriticConfig& config, std::vector<double> values, double tau_smooth = 0.005) {
  CriticPair p;
  p.config = config;
  p.tau_smooth = tau_smooth;
  for (double v : values) {
    MlpParams net = MlpParams::zeros(config.widths());
    net.bias(net.layers() - 1)(0, 0) = v;
    p.online.push_back(net);
    p.delayed.push_back(net);
  }
  return p;
}

/// Network with no hidden layers whose output is the first noise coordinate.
inline MlpParams noise_passthrough(const CriticConfig& config) {
  CriticConfig flat = config;
  flat.hidden = {};
  MlpParams net = MlpParams::zeros(flat.widths());
  net.weight(0)(config.state_dim + config.action_dim, 0) = 1.0;
  return net;
}

}  // namespace idac::testing
