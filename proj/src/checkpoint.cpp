#include "idac/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "idac/config.hpp"
#include "idac/errors.hpp"

namespace idac {

using nlohmann::json;

namespace {

json to_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from(const json& j) {
  const Index r = j.at("rows").get<Index>();
  const Index c = j.at("cols").get<Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (r < 0 || c < 0 || static_cast<Index>(data.size()) != r * c) throw CheckpointError("matrix size mismatch");
  Matrix m(r, c);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

json to_json(const std::vector<Matrix>& ms) {
  json a = json::array();
  for (const Matrix& m : ms) a.push_back(to_json(m));
  return a;
}

std::vector<Matrix> matrices_from(const json& j) {
  std::vector<Matrix> out;
  for (const json& m : j) out.push_back(matrix_from(m));
  return out;
}

json to_json(const MlpParams& p) { return json{{"widths", p.widths}, {"tensors", to_json(p.tensors)}}; }

MlpParams mlp_from(const json& j) {
  MlpParams p;
  p.widths = j.at("widths").get<std::vector<Index>>();
  p.tensors = matrices_from(j.at("tensors"));
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw CheckpointError(std::string("network: ") + e.what());
  }
  return p;
}

json to_json(const AdamState& s) {
  return json{{"learning_rate", s.config.learning_rate},
              {"beta1", s.config.beta1},
              {"beta2", s.config.beta2},
              {"epsilon", s.config.epsilon},
              {"step", s.step},
              {"first_moment", to_json(s.first_moment)},
              {"second_moment", to_json(s.second_moment)}};
}

AdamState adam_from(const json& j) {
  AdamState s;
  s.config.learning_rate = j.at("learning_rate").get<double>();
  s.config.beta1 = j.at("beta1").get<double>();
  s.config.beta2 = j.at("beta2").get<double>();
  s.config.epsilon = j.at("epsilon").get<double>();
  s.step = j.at("step").get<std::int64_t>();
  s.first_moment = matrices_from(j.at("first_moment"));
  s.second_moment = matrices_from(j.at("second_moment"));
  return s;
}

json to_json(const ActorConfig& c) {
  return json{{"state_dim", c.state_dim},         {"action_dim", c.action_dim},
              {"xi_dim", c.xi_dim},               {"hidden", c.hidden},
              {"squash", c.squash},               {"sigma_floor", c.sigma_floor},
              {"pre_sigma_min", c.pre_sigma_min}, {"pre_sigma_max", c.pre_sigma_max}};
}

ActorConfig actor_config_from(const json& j) {
  ActorConfig c;
  c.state_dim = j.at("state_dim").get<Index>();
  c.action_dim = j.at("action_dim").get<Index>();
  c.xi_dim = j.at("xi_dim").get<Index>();
  c.hidden = j.at("hidden").get<std::vector<Index>>();
  c.squash = j.at("squash").get<bool>();
  c.sigma_floor = j.at("sigma_floor").get<double>();
  c.pre_sigma_min = j.at("pre_sigma_min").get<double>();
  c.pre_sigma_max = j.at("pre_sigma_max").get<double>();
  return c;
}

json to_json(const CriticConfig& c) {
  return json{{"state_dim", c.state_dim}, {"action_dim", c.action_dim}, {"eps_dim", c.eps_dim}, {"hidden", c.hidden}};
}

CriticConfig critic_config_from(const json& j) {
  CriticConfig c;
  c.state_dim = j.at("state_dim").get<Index>();
  c.action_dim = j.at("action_dim").get<Index>();
  c.eps_dim = j.at("eps_dim").get<Index>();
  c.hidden = j.at("hidden").get<std::vector<Index>>();
  return c;
}

}  // namespace

Checkpoint make_checkpoint(const Trainer& trainer) {
  Checkpoint c;
  c.step = trainer.env_steps();
  c.config = trainer.config();
  c.actor = trainer.actor();
  c.critics = trainer.critics();
  c.eta = trainer.eta();
  c.actor_opt = trainer.actor_optimizer();
  c.critic_opt = trainer.critic_optimizers();
  c.eta_opt = trainer.eta_optimizer();
  return c;
}

void restore_checkpoint(Trainer& trainer, const Checkpoint& c) {
  trainer.restore(c.actor, c.critics, c.eta, c.actor_opt, c.critic_opt, c.eta_opt, c.step);
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  json online = json::array();
  json delayed = json::array();
  for (const MlpParams& p : c.critics.online) online.push_back(to_json(p));
  for (const MlpParams& p : c.critics.delayed) delayed.push_back(to_json(p));
  json critic_opt = json::array();
  for (const AdamState& s : c.critic_opt) critic_opt.push_back(to_json(s));

  const json doc{
      {"format", "idac-checkpoint"},
      {"version", kCheckpointVersion},
      {"step", c.step},
      {"config", config_to_map(c.config)},
      {"actor", {{"config", to_json(c.actor.config)}, {"net", to_json(c.actor.net)}}},
      {"critics",
       {{"config", to_json(c.critics.config)},
        {"tau_smooth", c.critics.tau_smooth},
        {"online", online},
        {"delayed", delayed}}},
      {"eta", c.eta},
      {"optimizers", {{"actor", to_json(c.actor_opt)}, {"critics", critic_opt}, {"eta", to_json(c.eta_opt)}}},
  };

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot write " + tmp.string());
    // Doubles are written in shortest round-trip form, so reloads are exact.
    f << doc.dump();
    if (!f.flush()) throw CheckpointError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot read checkpoint '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint '" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != "idac-checkpoint") {
    throw CheckpointError("'" + path.string() + "' is not an idac checkpoint");
  }
  const int version = doc.value("version", -1);
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint format version " + std::to_string(version) + " is incompatible (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  try {
    Checkpoint c;
    c.step = doc.at("step").get<std::int64_t>();
    try {
      c.config = config_from_map(doc.at("config").get<std::map<std::string, std::string>>());
    } catch (const ConfigError& e) {
      throw CheckpointError(std::string("checkpoint config: ") + e.what());
    }
    c.actor.config = actor_config_from(doc.at("actor").at("config"));
    c.actor.net = mlp_from(doc.at("actor").at("net"));
    if (c.actor.net.widths != c.actor.config.widths()) throw CheckpointError("actor network does not match its config");
    const json& cr = doc.at("critics");
    c.critics.config = critic_config_from(cr.at("config"));
    c.critics.tau_smooth = cr.at("tau_smooth").get<double>();
    for (const json& p : cr.at("online")) c.critics.online.push_back(mlp_from(p));
    for (const json& p : cr.at("delayed")) c.critics.delayed.push_back(mlp_from(p));
    if (c.critics.online.empty() || c.critics.online.size() > 2 ||
        c.critics.online.size() != c.critics.delayed.size()) {
      throw CheckpointError("checkpoint must hold one or two critics with matching delayed copies");
    }
    for (std::size_t z = 0; z < c.critics.count(); ++z) {
      if (c.critics.online[z].widths != c.critics.config.widths() ||
          c.critics.delayed[z].widths != c.critics.config.widths()) {
        throw CheckpointError("critic network does not match its config");
      }
    }
    c.eta = doc.at("eta").get<double>();
    const json& opt = doc.at("optimizers");
    c.actor_opt = adam_from(opt.at("actor"));
    for (const json& s : opt.at("critics")) c.critic_opt.push_back(adam_from(s));
    c.eta_opt = adam_from(opt.at("eta"));
    return c;
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint '" + path.string() + "' is malformed: " + e.what());
  }
}

}  // namespace idac
