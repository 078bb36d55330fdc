// Acceptance suite. Prints one PASS/FAIL line per criterion and exits 0 only
// when every hard gate passes. Training criteria load the desk presets from
// configs/; run artifacts (metrics, checkpoints) stay under --work-dir.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gradient_cases.hpp"
#include "idac/alloc_tuning.hpp"
#include "idac/checkpoint.hpp"
#include "idac/config.hpp"
#include "idac/diag.hpp"
#include "idac/distributional.hpp"
#include "idac/envs.hpp"
#include "idac/stats.hpp"
#include "idac/trainer.hpp"
#include "models.hpp"

namespace fs = std::filesystem;
using namespace idac;

namespace {

// ---- pinned tolerances ----
constexpr double kOracleTol = 1e-9;
constexpr double kGradientTol = 1e-4;
constexpr int kGradientSeeds = 100;
constexpr int kEntropyDraws = 100000;
constexpr double kEntropySeMultiple = 3.0;
constexpr double kEntropyLimitTol = 0.02;
constexpr int kFixedPointSamples = 10000;
constexpr double kFixedPointStdFraction = 0.1;
constexpr std::int64_t kFixedPointMaxSteps = 50000;
constexpr int kControlSeeds = 3;
constexpr int kBaselineRollouts = 10000;
constexpr double kControlStdMultiple = 3.0;
constexpr int kModeSamples = 1000;
constexpr double kModeRadius = 0.15;
constexpr double kModeMass = 0.2;
constexpr int kCorrelationSamples = 1000;
constexpr double kCorrelationMinAbsR = 0.3;
constexpr double kCorrelationMaxP = 0.01;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  bool hard = true;
  double budget_seconds = 0.0;  // 0: no runtime bound
  std::function<Outcome()> run;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

std::vector<double> vec(std::initializer_list<double> v) { return v; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Suite {
  fs::path config_dir;
  fs::path work_dir;

  TrainerConfig preset(const std::string& name) const { return load_config(config_dir / (name + ".conf")); }

  // ---- loss formulas against their hand-derived values ----

  Outcome loss_oracles() const {
    double worst = 0.0;
    int checked = 0;
    const auto check = [&](double got, double want) {
      worst = std::max(worst, std::abs(got - want));
      ++checked;
    };
    const auto check_vec = [&](const std::vector<double>& got, const std::vector<double>& want) {
      if (got.size() != want.size()) {
        worst = std::numeric_limits<double>::infinity();
        return;
      }
      for (std::size_t i = 0; i < got.size(); ++i) check(got[i], want[i]);
    };
    check(dist::huber_rho(0.0, 0.3, 1.0), 0.0);
    check(dist::huber_rho(2.0, 0.5, 1.0), 0.75);
    check(dist::huber_rho(-0.5, 0.25, 1.0), 0.09375);

    check(dist::quantile_huber_loss(vec({0.0}), vec({0.0}), dist::QuantileConfig{1, 1.0}), 0.0);
    check(dist::quantile_huber_loss(vec({0.0}), vec({2.0}), dist::QuantileConfig{1, 1.0}), 0.75);
    check(dist::quantile_huber_loss(vec({0.0, 0.0}), vec({-1.0, 1.0}), dist::QuantileConfig{2, 1.0}), 0.25);

    check(dist::empirical_wasserstein(vec({1.0, 5.0, 2.0}), vec({5.0, 2.0, 1.0})), 0.0);
    check(dist::empirical_wasserstein(vec({0.0, 0.0}), vec({1.0, 1.0})), 1.0);
    check(dist::empirical_wasserstein(vec({1.0, 3.0}), vec({2.0, 4.0})), 1.0);

    check_vec(dist::twin_min_targets(vec({3.0, 1.0, 2.0}), vec({3.0, 1.0, 2.0})).values, {1.0, 2.0, 3.0});
    check_vec(dist::twin_min_targets(vec({3.0, 1.0}), vec({2.0, 2.0})).values, {1.0, 2.0});
    check_vec(dist::twin_min_targets(vec({0.0, -1.0, 2.0}), vec({5.0, 3.0, 4.0})).values, {-1.0, 0.0, 2.0});
    return {worst <= kOracleTol, std::to_string(checked) + " values, max abs error " + fmt(worst)};
  }

  // ---- tape gradients against central differences ----

  Outcome gradients() const {
    double worst = 0.0;
    std::string worst_name;
    const auto note = [&](double err, const std::string& name) {
      if (!(err <= worst)) {
        worst = err;
        worst_name = name;
      }
    };
    const std::vector<testing::PrimitiveCase> cases = testing::primitive_cases();
    for (const testing::PrimitiveCase& c : cases) {
      for (int seed = 0; seed < kGradientSeeds; ++seed) {
        note(testing::gradient_error(c.fn, c.inputs(static_cast<std::uint64_t>(seed))), c.name);
      }
    }
    double critic_value_gap = 0.0;
    for (int seed = 0; seed < kGradientSeeds; ++seed) {
      const auto s = static_cast<std::uint64_t>(seed);
      note(testing::composite_graph_error(s), "composite graph");
      const testing::CriticLossCheck c = testing::critic_loss_check(s);
      note(c.gradient_error, "critic loss");
      critic_value_gap = std::max(critic_value_gap, std::abs(c.library_value - c.graph_value));
      note(testing::actor_loss_gradient_error(s), "actor loss");
    }
    const bool pass = worst < kGradientTol && critic_value_gap < 1e-12;
    return {pass, std::to_string(cases.size()) + " primitives + composite graphs + critic and actor losses, " +
                      std::to_string(kGradientSeeds) + " seeds each; worst relative error " + fmt(worst) + " (" +
                      worst_name + ")"};
  }

  // ---- mixture entropy bound on the linear test model ----

  Outcome entropy_bound() const {
    // xi ~ N(0, 1), a | xi ~ N(xi, 1): the marginal is N(0, 2).
    const ActorParams model = testing::linear_actor(1, 1, 1, 1.0, 0.0, 1.0, false);
    const double limit = -0.5 * std::log(4.0 * std::numbers::pi * std::numbers::e);
    const std::vector<int> levels{0, 1, 5, 20, 100};
    std::vector<EntropyBound> est;
    for (int l : levels) {
      Rng rng = Rng::derive(2024, static_cast<std::uint64_t>(l));
      est.push_back(entropy_bound_estimate(model, RowVector::Zero(1), l, kEntropyDraws, rng));
    }
    bool ordered = true;
    std::string values;
    for (std::size_t i = 0; i < est.size(); ++i) {
      values += (i ? ", H" : "H") + std::to_string(levels[i]) + "=" + fmt(est[i].value, 5);
      if (i == 0) continue;
      const double se = std::hypot(est[i - 1].std_error, est[i].std_error);
      ordered = ordered && est[i - 1].value >= est[i].value - kEntropySeMultiple * se;
    }
    const double gap = std::abs(est.back().value - limit);
    return {ordered && gap < kEntropyLimitTol,
            values + "; ordered within 3 SE: " + (ordered ? "yes" : "no") + "; |H100 - (" + fmt(limit, 5) +
                ")| = " + fmt(gap, 3)};
  }

  // ---- distributional Bellman fixed point on the Gaussian chain ----

  Outcome fixed_point() const {
    TrainerConfig c = preset("gaussian_chain");
    if (!c.freeze_actor || c.env != "gaussian_chain" || c.total_steps > kFixedPointMaxSteps) {
      return {false, "gaussian_chain preset must freeze the actor and train at most 5e4 steps"};
    }
    Trainer t(c);
    for (std::int64_t i = 0; i < c.total_steps; ++i) {
      t.collect_step();
      t.train_step();
    }
    const OracleReturn oracle = *t.env().oracle();
    const diag::Probe p = diag::probe(t.env(), t.actor(), 0, 77);
    Rng action_rng(78);
    const RowVector action = sample_action(t.actor(), p.state, action_rng.normal_matrix(1, t.actor().config.xi_dim),
                                           action_rng.normal_matrix(1, t.env_spec().action_dim));
    Rng analytic_rng(79);
    std::vector<double> analytic(kFixedPointSamples);
    for (double& v : analytic) v = oracle.mean + oracle.stddev * analytic_rng.normal();

    const double bound = kFixedPointStdFraction * oracle.stddev;
    bool pass = true;
    std::string detail = "analytic N(" + fmt(oracle.mean) + ", " + fmt(oracle.stddev) + "^2), steps " +
                         std::to_string(c.total_steps) + ", bound " + fmt(bound, 3) + ";";
    for (std::size_t z = 0; z < t.critics().count(); ++z) {
      Rng sample_rng = Rng::derive(80, z);
      const std::vector<double> gen =
          diag::critic_samples(t.critics().online[z], p.state, action, kFixedPointSamples, sample_rng);
      const double w1 = dist::empirical_wasserstein(gen, analytic);
      pass = pass && w1 < bound;
      detail += " critic " + std::to_string(z + 1) + " W1 " + fmt(w1, 3) + " (mean " + fmt(stats::mean(gen)) +
                ", std " + fmt(stats::stddev(gen)) + ")";
    }
    return {pass, detail};
  }

  // ---- point_reach runs shared by the control and ablation criteria ----

  struct SeedRun {
    double final_return = 0.0;
    double seconds = 0.0;
    bool diverged = false;
  };
  mutable std::map<std::pair<bool, int>, SeedRun> point_reach_runs;

  const SeedRun& point_reach_run(bool twin, int seed) const {
    const auto key = std::make_pair(twin, seed);
    if (auto it = point_reach_runs.find(key); it != point_reach_runs.end()) return it->second;
    TrainerConfig c = preset("point_reach");
    c.seed = static_cast<std::uint64_t>(seed);
    c.twin_critics = twin;
    const auto t0 = std::chrono::steady_clock::now();
    const RunResult r =
        run(c, work_dir / "point_reach" / ((twin ? "twin_seed" : "single_seed") + std::to_string(seed)));
    SeedRun out;
    out.seconds = seconds_since(t0);
    out.diverged = r.diverged;
    out.final_return = r.rows.empty() ? -std::numeric_limits<double>::infinity() : r.rows.back().eval.mean;
    return point_reach_runs[key] = out;
  }

  Outcome control() const {
    const TrainerConfig c = preset("point_reach");
    PointReach env(c.env_options.point_reach_horizon, 991);
    Rng rng(992);
    const std::vector<double> random_returns =
        rollout_returns(env, uniform_random_policy(env.spec(), rng), kBaselineRollouts);
    const double base_mean = stats::mean(random_returns);
    const double base_std = stats::stddev(random_returns);
    // The evaluation return is a mean over eval_rollouts episodes, so it is
    // compared against the spread of that same statistic under the random policy.
    const double eval_std = base_std / std::sqrt(static_cast<double>(c.eval_rollouts));
    const double threshold = base_mean + kControlStdMultiple * eval_std;
    const double literal = base_mean + kControlStdMultiple * base_std;

    int passed = 0;
    std::string seeds;
    for (int seed = 1; seed <= kControlSeeds; ++seed) {
      const SeedRun& r = point_reach_run(true, seed);
      const bool ok = !r.diverged && r.final_return >= threshold && r.seconds < 900.0;
      passed += ok;
      seeds += " seed " + std::to_string(seed) + ": " + fmt(r.final_return) + " in " + fmt(r.seconds, 3) + " s" +
               (ok ? "" : " (fail)") + ";";
    }
    return {passed == kControlSeeds,
            "random baseline " + fmt(base_mean) + " (per-episode std " + fmt(base_std) + ", " +
                std::to_string(c.eval_rollouts) + "-episode-mean std " + fmt(eval_std) + "), threshold " +
                fmt(threshold) + ";" + seeds + " literal per-episode threshold " + fmt(literal) +
                " exceeds the maximum possible return 0"};
  }

  Outcome ablation() const {
    double twin_sum = 0.0, single_sum = 0.0;
    int ordered = 0;
    std::string seeds;
    for (int seed = 1; seed <= kControlSeeds; ++seed) {
      const double tw = point_reach_run(true, seed).final_return;
      const double si = point_reach_run(false, seed).final_return;
      twin_sum += tw;
      single_sum += si;
      ordered += tw >= si;
      seeds += " seed " + std::to_string(seed) + ": twin " + fmt(tw) + " vs single " + fmt(si) + ";";
    }
    return {twin_sum >= single_sum, "mean twin " + fmt(twin_sum / kControlSeeds) + " vs single " +
                                        fmt(single_sum / kControlSeeds) + ", twin >= single on " +
                                        std::to_string(ordered) + "/" + std::to_string(kControlSeeds) + " seeds;" +
                                        seeds};
  }

  // ---- policy shape on the one-step tasks ----

  static std::unique_ptr<Trainer> train(const TrainerConfig& c) {
    auto t = std::make_unique<Trainer>(c);
    for (std::int64_t i = 0; i < c.total_steps; ++i) {
      t->collect_step();
      t->train_step();
    }
    return t;
  }

  struct ModeMass {
    double plus = 0.0;
    double minus = 0.0;
    bool both() const { return plus >= kModeMass && minus >= kModeMass; }
  };

  static ModeMass mode_mass(const Trainer& t, std::uint64_t seed) {
    Rng rng(seed);
    const diag::PolicySamples s =
        diag::policy_samples(t.actor(), t.env_spec(), t.env().clone()->reset(), kModeSamples, rng);
    ModeMass m;
    for (Index i = 0; i < s.actions.rows(); ++i) {
      m.plus += std::abs(s.actions(i, 0) - 0.5) <= kModeRadius;
      m.minus += std::abs(s.actions(i, 0) + 0.5) <= kModeRadius;
    }
    m.plus /= kModeSamples;
    m.minus /= kModeSamples;
    return m;
  }

  Outcome multimodality() const {
    const TrainerConfig sia = preset("bimodal_bandit");
    TrainerConfig gauss = sia;
    gauss.policy = "gaussian";
    const ModeMass a = mode_mass(*train(sia), 501);
    const ModeMass b = mode_mass(*train(gauss), 501);
    return {a.both() && !b.both(), "sia mass near +0.5 " + fmt(a.plus, 3) + ", near -0.5 " + fmt(a.minus, 3) +
                                       "; gaussian " + fmt(b.plus, 3) + " / " + fmt(b.minus, 3) + " (need >= " +
                                       fmt(kModeMass) + " on both for sia, < on one for gaussian)"};
  }

  Outcome correlation() const {
    const std::unique_ptr<Trainer> t = train(preset("correlated_action"));
    Rng rng(601);
    const diag::PolicySamples s =
        diag::policy_samples(t->actor(), t->env_spec(), t->env().clone()->reset(), kCorrelationSamples, rng);
    diag::write_policy_samples(s, work_dir / "correlated_action");
    const double r = s.pearson_r(0, 1);
    const double p = s.pearson_p(0, 1);
    return {std::abs(r) > kCorrelationMinAbsR && p < kCorrelationMaxP,
            "pearson r " + fmt(r) + ", p " + fmt(p, 3) + " over " + std::to_string(kCorrelationSamples) +
                " samples; mean (" + fmt(s.mean(0), 3) + ", " + fmt(s.mean(1), 3) + ")"};
  }

  // ---- bitwise reproducibility ----

  Outcome determinism() const {
    TrainerConfig c = preset("point_reach");
    c.total_steps = 4000;
    c.eval_interval = 1000;
    c.checkpoint_interval = 4000;
    const auto read = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      return std::string(std::istreambuf_iterator<char>(in), {});
    };
    run(c, work_dir / "determinism" / "a");
    run(c, work_dir / "determinism" / "b");
    const std::string a = read(work_dir / "determinism" / "a" / "metrics.csv");
    const std::string b = read(work_dir / "determinism" / "b" / "metrics.csv");
    const auto rows = std::count(a.begin(), a.end(), '\n');
    return {!a.empty() && rows > 1 && a == b,
            std::to_string(rows - 1) + " metrics rows, " + std::to_string(a.size()) + " bytes, " +
                (a == b ? "identical" : "different")};
  }
};

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"IDAC acceptance suite"};
  std::string only;
  std::string work = "acceptance_runs";
  std::string config_dir = IDAC_CONFIG_DIR;
  app.add_option("--only", only, "Comma-separated criterion names to run");
  app.add_option("--work-dir", work, "Directory for run artifacts");
  app.add_option("--config-dir", config_dir, "Directory holding the desk presets");
  CLI11_PARSE(app, argc, argv);

  Suite suite{config_dir, work};
  fs::create_directories(suite.work_dir);
  const std::vector<Criterion> criteria{
      {"loss_oracles", true, 1.0, [&] { return suite.loss_oracles(); }},
      {"gradient_correctness", true, 60.0, [&] { return suite.gradients(); }},
      {"entropy_bound_ordering", true, 120.0, [&] { return suite.entropy_bound(); }},
      {"bellman_fixed_point", true, 600.0, [&] { return suite.fixed_point(); }},
      {"control_learning", true, 0.0, [&] { return suite.control(); }},  // 15 min per seed, checked inside
      {"multimodality", true, 300.0, [&] { return suite.multimodality(); }},
      {"correlation_capture", true, 300.0, [&] { return suite.correlation(); }},
      {"ablation_ordering", false, 0.0, [&] { return suite.ablation(); }},
      {"determinism", true, 300.0, [&] { return suite.determinism(); }},
  };
  std::set<std::string> selected;
  for (std::stringstream ss(only); ss.good();) {
    std::string name;
    std::getline(ss, name, ',');
    if (!name.empty()) selected.insert(name);
  }

  bool all_hard = true;
  int ran = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.name)) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    if (c.budget_seconds > 0.0 && secs >= c.budget_seconds) {
      o.pass = false;
      o.detail += "; over the " + fmt(c.budget_seconds) + " s budget";
    }
    if (c.hard) all_hard = all_hard && o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << (c.hard ? "" : " [soft]") << " (" << fmt(secs, 3)
              << " s): " << o.detail << std::endl;
  }
  if (ran == 0) {
    std::cerr << "no criterion matches --only " << only << "\n";
    return 1;
  }
  return all_hard ? 0 : 1;
}
