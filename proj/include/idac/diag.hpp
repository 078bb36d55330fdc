#pragma once

// Diagnostics on a trained policy and critic pair, written as CSV for the
// plotting tool. Column sets are fixed per mode:
//
//   policy_samples.csv        a0,a1,...                 one sampled action per row (environment units)
//   policy_samples_stats.csv  kind,i,j,value            kind in {mean, std, skewness, excess_kurtosis,
//                                                       pearson_r, pearson_p}; j = i for per-dimension rows
//   quantile_match.csv        index,generator,target    both columns sorted ascending
//   quantile_match_stats.csv  key,value
//   entropy_curve.csv         L,estimate,std_error

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "idac/actor.hpp"
#include "idac/critic.hpp"
#include "idac/envs.hpp"

namespace idac::diag {

/// Environment copy advanced `state_index` steps from a reset by the policy's
/// mean action (restarting at episode ends), together with its current state.
struct Probe {
  std::unique_ptr<Environment> env;
  RowVector state;
};
Probe probe(const Environment& env, const ActorParams& actor, int state_index, std::uint64_t seed);

struct PolicySamples {
  Matrix actions;  // n x action_dim, environment units
  RowVector mean;
  RowVector stddev;
  RowVector skewness;
  RowVector excess_kurtosis;
  Matrix pearson_r;  // action_dim x action_dim
  Matrix pearson_p;
};
PolicySamples policy_samples(const ActorParams& actor, const EnvSpec& spec, const RowVector& state, int n, Rng& rng);

struct QuantileMatch {
  std::vector<double> generator;  // sorted G_1(s, a, eps_k)
  std::vector<double> target;     // sorted-min of r_k + gamma (1 - done_k) G~_z(s'_k, a'_k, eps'_k)
  double w1 = 0.0;
  RowVector state;
  RowVector action;
  /// W1 of the generator samples against the analytic return distribution,
  /// when the environment has one and the probe is its initial state.
  std::optional<double> oracle_w1;
  std::optional<double> oracle_mean;
  std::optional<double> oracle_std;
};
/// `probe_env` must sit at `state`; each target sample steps a reseeded copy of it.
QuantileMatch quantile_match(const CriticPair& critics, const ActorParams& actor, const Environment& probe_env,
                             const RowVector& state, bool initial_state, double gamma, int n, Rng& rng);

/// Generator samples at one (state, action): G_z(s, a, eps_k), k < n.
std::vector<double> critic_samples(const MlpParams& omega, const RowVector& state, const RowVector& action, int n,
                                   Rng& rng);

struct EntropyPoint {
  int num_mixture = 0;
  double estimate = 0.0;
  double std_error = 0.0;
};
const std::vector<int>& default_entropy_levels();
std::vector<EntropyPoint> entropy_curve(const ActorParams& actor, const RowVector& state,
                                        const std::vector<int>& levels, int draws, Rng& rng);

void write_policy_samples(const PolicySamples& s, const std::filesystem::path& dir);
void write_quantile_match(const QuantileMatch& q, const std::filesystem::path& dir);
void write_entropy_curve(const std::vector<EntropyPoint>& curve, const std::filesystem::path& dir);

}  // namespace idac::diag
