#include "idac/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "idac/errors.hpp"

namespace idac {

namespace {

// Parse failures inside a setter; rethrown with the line number.
struct BadValue {
  std::string what;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& s) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
    throw BadValue{"expected a number, got '" + s + "'"};
  }
  return v;
}

std::int64_t to_int(const std::string& s) {
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    // Accept integral scientific notation such as 5e4.
    double d = 0.0;
    try {
      d = to_double(s);
    } catch (const BadValue&) {
      throw BadValue{"expected an integer, got '" + s + "'"};
    }
    if (d != std::floor(d) || std::fabs(d) > 9e15) throw BadValue{"expected an integer, got '" + s + "'"};
    return static_cast<std::int64_t>(d);
  }
  return v;
}

std::uint64_t to_uint(const std::string& s) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw BadValue{"expected a non-negative integer, got '" + s + "'"};
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw BadValue{"expected true or false, got '" + s + "'"};
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::vector<double> to_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(to_double(item));
  return out;
}

std::vector<Index> to_widths(const std::string& s) {
  std::vector<Index> out;
  for (const auto& item : split_list(s)) {
    const std::int64_t w = to_int(item);
    if (w < 1) throw BadValue{"layer widths must be positive"};
    out.push_back(static_cast<Index>(w));
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += f(v[i]);
  }
  return out;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

struct Field {
  const char* key;
  std::function<void(TrainerConfig&, const std::string&)> set;
  std::function<std::string(const TrainerConfig&)> get;
};

#define IDAC_DOUBLE(name, member)                                            \
  Field {                                                                    \
    name, [](TrainerConfig& c, const std::string& v) { c.member = to_double(v); }, \
        [](const TrainerConfig& c) { return format_double(c.member); }       \
  }
#define IDAC_INT(name, member, type)                                                          \
  Field {                                                                                     \
    name, [](TrainerConfig& c, const std::string& v) { c.member = static_cast<type>(to_int(v)); }, \
        [](const TrainerConfig& c) { return std::to_string(c.member); }                       \
  }
#define IDAC_BOOL(name, member)                                            \
  Field {                                                                  \
    name, [](TrainerConfig& c, const std::string& v) { c.member = to_bool(v); }, \
        [](const TrainerConfig& c) { return bool_text(c.member); }         \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"env", [](TrainerConfig& c, const std::string& v) { c.env = v; },
            [](const TrainerConfig& c) { return c.env; }},
      Field{"run_id", [](TrainerConfig& c, const std::string& v) { c.run_id = v; },
            [](const TrainerConfig& c) { return c.run_id; }},
      Field{"output_dir", [](TrainerConfig& c, const std::string& v) { c.output_dir = v; },
            [](const TrainerConfig& c) { return c.output_dir; }},
      Field{"seed", [](TrainerConfig& c, const std::string& v) { c.seed = to_uint(v); },
            [](const TrainerConfig& c) { return std::to_string(c.seed); }},
      IDAC_DOUBLE("gamma", gamma),
      IDAC_DOUBLE("learning_rate", learning_rate),
      IDAC_DOUBLE("tau_smooth", tau_smooth),
      IDAC_INT("batch_size", batch_size, int),
      IDAC_INT("num_quantiles", num_quantiles, int),
      IDAC_INT("num_actions", num_actions, int),
      IDAC_INT("num_mixture", num_mixture, int),
      IDAC_DOUBLE("kappa", kappa),
      IDAC_INT("xi_dim", xi_dim, int),
      IDAC_INT("eps_dim", eps_dim, int),
      Field{"target_entropy",
            [](TrainerConfig& c, const std::string& v) {
              c.target_entropy = v == "auto" ? std::numeric_limits<double>::quiet_NaN() : to_double(v);
            },
            [](const TrainerConfig& c) {
              return std::isnan(c.target_entropy) ? std::string("auto") : format_double(c.target_entropy);
            }},
      IDAC_DOUBLE("initial_alpha", initial_alpha),
      IDAC_BOOL("learn_alpha", learn_alpha),
      Field{"actor_hidden", [](TrainerConfig& c, const std::string& v) { c.actor_hidden = to_widths(v); },
            [](const TrainerConfig& c) {
              return join<Index>(c.actor_hidden, [](const Index& w) { return std::to_string(w); });
            }},
      Field{"critic_hidden", [](TrainerConfig& c, const std::string& v) { c.critic_hidden = to_widths(v); },
            [](const TrainerConfig& c) {
              return join<Index>(c.critic_hidden, [](const Index& w) { return std::to_string(w); });
            }},
      IDAC_INT("total_steps", total_steps, std::int64_t),
      IDAC_INT("warmup_steps", warmup_steps, std::int64_t),
      IDAC_INT("eval_interval", eval_interval, std::int64_t),
      IDAC_INT("eval_rollouts", eval_rollouts, int),
      IDAC_INT("checkpoint_interval", checkpoint_interval, std::int64_t),
      IDAC_INT("checkpoint_keep", checkpoint_keep, int),
      IDAC_INT("replay_capacity", replay_capacity, std::int64_t),
      IDAC_BOOL("twin_critics", twin_critics),
      Field{"policy", [](TrainerConfig& c, const std::string& v) { c.policy = v; },
            [](const TrainerConfig& c) { return c.policy; }},
      IDAC_BOOL("squash", squash),
      IDAC_BOOL("independent_target_noise", independent_target_noise),
      IDAC_BOOL("freeze_actor", freeze_actor),
      Field{"chain_mu", [](TrainerConfig& c, const std::string& v) { c.env_options.chain_mu = to_doubles(v); },
            [](const TrainerConfig& c) {
              return join<double>(c.env_options.chain_mu, [](const double& x) { return format_double(x); });
            }},
      Field{"chain_sigma",
            [](TrainerConfig& c, const std::string& v) { c.env_options.chain_sigma = to_doubles(v); },
            [](const TrainerConfig& c) {
              return join<double>(c.env_options.chain_sigma, [](const double& x) { return format_double(x); });
            }},
      IDAC_INT("point_reach_horizon", env_options.point_reach_horizon, int),
      IDAC_DOUBLE("correlation_anisotropy", env_options.correlation_anisotropy),
  };
  return table;
}

#undef IDAC_DOUBLE
#undef IDAC_INT
#undef IDAC_BOOL

const Field* find_field(const std::string& key) {
  for (const Field& f : fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

TrainerConfig finish(TrainerConfig cfg) {
  // The chain's discount is the trainer's discount.
  cfg.env_options.gamma = cfg.gamma;
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const Field& f : fields()) k.emplace_back(f.key);
    return k;
  }();
  return keys;
}

TrainerConfig parse_config(const std::string& text) {
  TrainerConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line_no);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Field* f = find_field(key);
    if (f == nullptr) throw ConfigError("unknown key '" + key + "'", line_no);
    if (!seen.insert(key).second) throw ConfigError("duplicate key '" + key + "'", line_no);
    try {
      f->set(cfg, value);
    } catch (const BadValue& e) {
      throw ConfigError(key + ": " + e.what, line_no);
    }
  }
  return finish(std::move(cfg));
}

TrainerConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const TrainerConfig& config) {
  std::string out;
  for (const Field& f : fields()) out += std::string(f.key) + " = " + f.get(config) + "\n";
  return out;
}

std::map<std::string, std::string> config_to_map(const TrainerConfig& config) {
  std::map<std::string, std::string> out;
  for (const Field& f : fields()) out[f.key] = f.get(config);
  return out;
}

TrainerConfig config_from_map(const std::map<std::string, std::string>& values) {
  TrainerConfig cfg;
  for (const auto& [key, value] : values) {
    const Field* f = find_field(key);
    if (f == nullptr) throw ConfigError("unknown key '" + key + "'");
    try {
      f->set(cfg, value);
    } catch (const BadValue& e) {
      throw ConfigError(key + ": " + e.what);
    }
  }
  return finish(std::move(cfg));
}

}  // namespace idac
