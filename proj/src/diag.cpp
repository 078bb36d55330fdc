#include "idac/diag.hpp"

#include <fstream>

#include "idac/config.hpp"
#include "idac/distributional.hpp"
#include "idac/errors.hpp"
#include "idac/stats.hpp"
#include "idac/trainer.hpp"

namespace idac::diag {

namespace {

std::ofstream open_csv(const std::filesystem::path& dir, const char* name) {
  std::filesystem::create_directories(dir);
  std::ofstream f(dir / name, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
  return f;
}

std::vector<double> column(const Matrix& m, Index c) {
  std::vector<double> v(static_cast<std::size_t>(m.rows()));
  for (Index r = 0; r < m.rows(); ++r) v[static_cast<std::size_t>(r)] = m(r, c);
  return v;
}

}  // namespace

Probe probe(const Environment& env, const ActorParams& actor, int state_index, std::uint64_t seed) {
  if (state_index < 0) throw InvalidArgument("probe: state index must be non-negative");
  Probe p;
  p.env = env.clone();
  p.env->seed(Rng::derive(seed, 0).next_u64());
  Rng rng = Rng::derive(seed, 1);
  p.state = p.env->reset();
  for (int t = 0; t < state_index; ++t) {
    const Matrix xi = rng.normal_matrix(1, actor.config.xi_dim);
    const StepResult r = p.env->step(to_env_action(p.env->spec(), mean_action(actor, p.state, xi)));
    p.state = (r.terminal || r.truncated) ? p.env->reset() : r.state;
  }
  return p;
}

PolicySamples policy_samples(const ActorParams& actor, const EnvSpec& spec, const RowVector& state, int n, Rng& rng) {
  if (n < 3) throw InvalidArgument("policy_samples: need at least 3 samples");
  const Index d = actor.config.action_dim;
  const Matrix xi = rng.normal_matrix(n, actor.config.xi_dim);
  const Matrix e = rng.normal_matrix(n, d);
  const Matrix a = sample_action(actor, state.replicate(n, 1), xi, e);
  PolicySamples out;
  out.actions.resize(n, d);
  for (Index r = 0; r < n; ++r) out.actions.row(r) = to_env_action(spec, a.row(r));
  out.mean.resize(d);
  out.stddev.resize(d);
  out.skewness.resize(d);
  out.excess_kurtosis.resize(d);
  out.pearson_r = Matrix::Identity(d, d);
  out.pearson_p = Matrix::Zero(d, d);
  std::vector<std::vector<double>> cols;
  for (Index i = 0; i < d; ++i) cols.push_back(column(out.actions, i));
  for (Index i = 0; i < d; ++i) {
    out.mean(i) = stats::mean(cols[i]);
    out.stddev(i) = stats::stddev(cols[i]);
    out.skewness(i) = stats::skewness(cols[i]);
    out.excess_kurtosis(i) = stats::excess_kurtosis(cols[i]);
    for (Index j = i + 1; j < d; ++j) {
      const stats::Correlation c = stats::pearson(cols[i], cols[j]);
      out.pearson_r(i, j) = out.pearson_r(j, i) = c.r;
      out.pearson_p(i, j) = out.pearson_p(j, i) = c.p_value;
    }
  }
  return out;
}

std::vector<double> critic_samples(const MlpParams& omega, const RowVector& state, const RowVector& action, int n,
                                   Rng& rng) {
  const Matrix eps = rng.normal_matrix(n, omega.input_width() - state.size() - action.size());
  const Matrix g = generate_samples(omega, state, action, eps);  // 1 x n
  return std::vector<double>(g.data(), g.data() + g.size());
}

QuantileMatch quantile_match(const CriticPair& critics, const ActorParams& actor, const Environment& probe_env,
                             const RowVector& state, bool initial_state, double gamma, int n, Rng& rng) {
  if (n < 1) throw InvalidArgument("quantile_match: need at least one sample");
  const EnvSpec& spec = probe_env.spec();
  const Index eps_dim = critics.config.eps_dim;
  QuantileMatch q;
  q.state = state;
  q.action = sample_action(actor, state, rng.normal_matrix(1, actor.config.xi_dim),
                           rng.normal_matrix(1, spec.action_dim));
  q.generator = dist::sort_samples(critic_samples(critics.online[0], state, q.action, n, rng)).values;

  // One environment step per target sample, each from its own reseeded copy.
  TransitionBatch batch;
  batch.states = state.replicate(n, 1);
  batch.actions = q.action.replicate(n, 1);
  batch.rewards.resize(n, 1);
  batch.next_states.resize(n, spec.state_dim);
  batch.dones.resize(n, 1);
  const RowVector env_action = to_env_action(spec, q.action);
  for (int k = 0; k < n; ++k) {
    std::unique_ptr<Environment> e = probe_env.clone();
    e->seed(rng.next_u64());
    const StepResult r = e->step(env_action);
    batch.rewards(k, 0) = r.reward;
    batch.next_states.row(k) = r.state;
    batch.dones(k, 0) = r.terminal ? 1.0 : 0.0;
  }
  const Matrix a_next = sample_action(actor, batch.next_states, rng.normal_matrix(n, actor.config.xi_dim),
                                      rng.normal_matrix(n, spec.action_dim));
  const Matrix eps_next = rng.normal_matrix(n, eps_dim);
  std::vector<std::vector<double>> per_critic;
  for (std::size_t z = 0; z < critics.count(); ++z) {
    const Matrix g = critic_values(critics.delayed[z], batch.next_states, a_next, eps_next);
    std::vector<double> y(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) y[k] = batch.rewards(k, 0) + gamma * (1.0 - batch.dones(k, 0)) * g(k, 0);
    per_critic.push_back(std::move(y));
  }
  q.target = per_critic.size() == 2 ? dist::twin_min_targets(per_critic[0], per_critic[1]).values
                                    : dist::sort_samples(per_critic[0]).values;
  q.w1 = dist::empirical_wasserstein(q.generator, q.target);

  const std::optional<OracleReturn> oracle = probe_env.oracle();
  if (initial_state && oracle && oracle->family == "normal") {
    // Exact quantiles at (k - 0.5) / n stand in for analytic samples.
    std::vector<double> ref(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      ref[k] = oracle->mean + oracle->stddev * stats::normal_quantile((k + 0.5) / n);
    }
    q.oracle_w1 = dist::empirical_wasserstein(q.generator, ref);
    q.oracle_mean = oracle->mean;
    q.oracle_std = oracle->stddev;
  }
  return q;
}

const std::vector<int>& default_entropy_levels() {
  static const std::vector<int> levels{0, 1, 2, 5, 10, 21, 50, 100};
  return levels;
}

std::vector<EntropyPoint> entropy_curve(const ActorParams& actor, const RowVector& state,
                                        const std::vector<int>& levels, int draws, Rng& rng) {
  std::vector<EntropyPoint> out;
  for (int l : levels) {
    const EntropyBound b = entropy_bound_estimate(actor, state, l, draws, rng);
    out.push_back({l, b.value, b.std_error});
  }
  return out;
}

void write_policy_samples(const PolicySamples& s, const std::filesystem::path& dir) {
  const Index d = s.actions.cols();
  std::ofstream f = open_csv(dir, "policy_samples.csv");
  for (Index i = 0; i < d; ++i) f << (i ? "," : "") << 'a' << i;
  f << '\n';
  for (Index r = 0; r < s.actions.rows(); ++r) {
    for (Index i = 0; i < d; ++i) f << (i ? "," : "") << format_double(s.actions(r, i));
    f << '\n';
  }
  std::ofstream st = open_csv(dir, "policy_samples_stats.csv");
  st << "kind,i,j,value\n";
  const auto row = [&](const char* kind, Index i, Index j, double v) {
    st << kind << ',' << i << ',' << j << ',' << format_double(v) << '\n';
  };
  for (Index i = 0; i < d; ++i) {
    row("mean", i, i, s.mean(i));
    row("std", i, i, s.stddev(i));
    row("skewness", i, i, s.skewness(i));
    row("excess_kurtosis", i, i, s.excess_kurtosis(i));
  }
  for (Index i = 0; i < d; ++i) {
    for (Index j = i + 1; j < d; ++j) {
      row("pearson_r", i, j, s.pearson_r(i, j));
      row("pearson_p", i, j, s.pearson_p(i, j));
    }
  }
}

void write_quantile_match(const QuantileMatch& q, const std::filesystem::path& dir) {
  std::ofstream f = open_csv(dir, "quantile_match.csv");
  f << "index,generator,target\n";
  for (std::size_t k = 0; k < q.generator.size(); ++k) {
    f << k << ',' << format_double(q.generator[k]) << ',' << format_double(q.target[k]) << '\n';
  }
  std::ofstream st = open_csv(dir, "quantile_match_stats.csv");
  st << "key,value\n";
  st << "w1," << format_double(q.w1) << '\n';
  st << "generator_mean," << format_double(stats::mean(q.generator)) << '\n';
  st << "generator_std," << format_double(stats::stddev(q.generator)) << '\n';
  st << "target_mean," << format_double(stats::mean(q.target)) << '\n';
  st << "target_std," << format_double(stats::stddev(q.target)) << '\n';
  if (q.oracle_w1) {
    st << "oracle_mean," << format_double(*q.oracle_mean) << '\n';
    st << "oracle_std," << format_double(*q.oracle_std) << '\n';
    st << "oracle_w1," << format_double(*q.oracle_w1) << '\n';
  }
}

void write_entropy_curve(const std::vector<EntropyPoint>& curve, const std::filesystem::path& dir) {
  std::ofstream f = open_csv(dir, "entropy_curve.csv");
  f << "L,estimate,std_error\n";
  for (const EntropyPoint& p : curve) {
    f << p.num_mixture << ',' << format_double(p.estimate) << ',' << format_double(p.std_error) << '\n';
  }
}

}  // namespace idac::diag
