#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "notirl/errors.hpp"
#include "notirl/mdp.hpp"
#include "notirl/mlp.hpp"
#include "notirl/ope.hpp"
#include "notirl/reward_models.hpp"
#include "notirl/rng.hpp"
#include "notirl/sim.hpp"
#include "notirl/trainer.hpp"
#include "notirl/version.hpp"

namespace notirl {

using nlohmann::json;

// Shortest round-trip decimal form; identical input bits always produce
// identical text, which the byte-level reproducibility guarantees lean on.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path);
  out << content;
  if (!out) throw DataError("short write to file: " + path);
}

inline std::string content_digest(std::string_view content) {
  const std::uint64_t h = fnv1a64(content);
  std::ostringstream ss;
  ss << "fnv1a64:" << std::hex;
  for (int i = 15; i >= 0; --i) ss << ((h >> (4 * i)) & 0xF);
  return ss.str();
}

// ---------------------------------------------------------------------------
// Dataset: one JSON header line, then one JSON array per transition in fixed
// field order: episode_id, t_k, t_next, features..., action, m_sessions,
// m_click, m_volume, behavior_propensity, terminal. next_state is
// reconstructed from the following row on read, so it is never stored.

inline std::string dataset_to_string(const Dataset& ds) {
  json header;
  header["format_version"] = kFormatVersion;
  header["feature_schema"] = ds.feature_schema;
  header["provenance"] = {{"seed", ds.provenance.seed},
                          {"behavior_policy", ds.provenance.behavior_policy},
                          {"config_digest", ds.provenance.config_digest},
                          {"tool_version", ds.provenance.tool_version}};
  std::string out = header.dump();
  out.push_back('\n');
  for (const Trajectory& traj : ds.trajectories) {
    for (const Transition& tr : traj.steps) {
      json row = json::array();
      row.push_back(tr.episode_id);
      row.push_back(tr.t_k);
      row.push_back(tr.t_next);
      for (double f : tr.state) row.push_back(f);
      row.push_back(action_index(tr.action));
      row.push_back(tr.reward.sessions);
      row.push_back(tr.reward.click);
      row.push_back(tr.reward.volume);
      row.push_back(tr.behavior_propensity);
      row.push_back(tr.terminal ? 1 : 0);
      out += row.dump();
      out.push_back('\n');
    }
  }
  return out;
}

inline void write_dataset(const Dataset& ds, const std::string& path) {
  write_text_file(path, dataset_to_string(ds));
}

namespace iodetail {

inline double row_double(const json& row, std::size_t idx, std::size_t line) {
  const json& v = row.at(idx);
  if (!v.is_number())
    throw DataError("dataset line " + std::to_string(line) + ": field " +
                    std::to_string(idx) + " must be a number");
  return v.get<double>();
}

inline long long row_int(const json& row, std::size_t idx, std::size_t line) {
  const json& v = row.at(idx);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw DataError("dataset line " + std::to_string(line) + ": field " +
                    std::to_string(idx) + " must be an integer");
  return v.get<long long>();
}

}  // namespace iodetail

inline Dataset parse_dataset(std::string_view content) {
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line))
    throw DataError("dataset: empty file");
  ++line_no;
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(std::string("dataset: invalid header: ") + e.what());
  }
  if (!header.is_object() || !header.contains("format_version") ||
      !header.contains("feature_schema") || !header.contains("provenance"))
    throw DataError("dataset: header missing required fields");
  if (header["format_version"].get<int>() != kFormatVersion)
    throw DataError("dataset: unsupported format_version");

  Dataset ds;
  for (const json& name : header["feature_schema"]) {
    if (!name.is_string())
      throw DataError("dataset: feature_schema entries must be strings");
    ds.feature_schema.push_back(name.get<std::string>());
  }
  if (ds.feature_schema.empty())
    throw DataError("dataset: empty feature schema");
  const json& prov = header["provenance"];
  ds.provenance.seed = prov.value("seed", std::uint64_t{0});
  ds.provenance.behavior_policy = prov.value("behavior_policy", "");
  ds.provenance.config_digest = prov.value("config_digest", "");
  ds.provenance.tool_version = prov.value("tool_version", "");

  const std::size_t dim = ds.feature_schema.size();
  const std::size_t expected_len = dim + 9;
  Trajectory current;
  bool have_current = false;
  auto flush = [&]() {
    if (!have_current) return;
    // The final row of an episode has no successor; mirror the in-memory
    // convention of repeating the state.
    current.steps.back().next_state = current.steps.back().state;
    ds.trajectories.push_back(std::move(current));
    current = Trajectory{};
    have_current = false;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("dataset line " + std::to_string(line_no) +
                      ": invalid JSON: " + e.what());
    }
    if (!row.is_array() || row.size() != expected_len)
      throw DataError("dataset line " + std::to_string(line_no) +
                      ": expected an array of " +
                      std::to_string(expected_len) + " fields");
    using iodetail::row_double;
    using iodetail::row_int;
    Transition tr;
    const long long eid = row_int(row, 0, line_no);
    if (eid < 0)
      throw DataError("dataset line " + std::to_string(line_no) +
                      ": negative episode_id");
    tr.episode_id = static_cast<std::uint64_t>(eid);
    tr.t_k = row_double(row, 1, line_no);
    tr.t_next = row_double(row, 2, line_no);
    tr.state.resize(dim);
    for (std::size_t j = 0; j < dim; ++j)
      tr.state[j] = row_double(row, 3 + j, line_no);
    const long long a = row_int(row, 3 + dim, line_no);
    if (a != 0 && a != 1)
      throw DataError("dataset line " + std::to_string(line_no) +
                      ": action must be 0 or 1");
    tr.action = static_cast<Action>(a);
    tr.reward.sessions = static_cast<int>(row_int(row, 4 + dim, line_no));
    tr.reward.click = static_cast<int>(row_int(row, 5 + dim, line_no));
    tr.reward.volume = static_cast<int>(row_int(row, 6 + dim, line_no));
    tr.behavior_propensity = row_double(row, 7 + dim, line_no);
    const long long term = row_int(row, 8 + dim, line_no);
    if (term != 0 && term != 1)
      throw DataError("dataset line " + std::to_string(line_no) +
                      ": terminal must be 0 or 1");
    tr.terminal = term == 1;

    if (have_current && tr.episode_id != current.episode_id) flush();
    if (!have_current) {
      current.episode_id = tr.episode_id;
      current.user_id = tr.episode_id;
      have_current = true;
    } else {
      current.steps.back().next_state = tr.state;
    }
    current.steps.push_back(std::move(tr));
  }
  flush();

  for (std::size_t i = 1; i < ds.trajectories.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (ds.trajectories[i].episode_id == ds.trajectories[j].episode_id)
        throw DataError("dataset: episode " +
                        std::to_string(ds.trajectories[i].episode_id) +
                        " appears in non-contiguous blocks");
  const std::vector<std::string> violations = validate_dataset(ds);
  if (!violations.empty())
    throw DataError("dataset: " + violations.front() +
                    (violations.size() > 1
                         ? " (+" + std::to_string(violations.size() - 1) +
                               " more)"
                         : ""));
  return ds;
}

inline Dataset read_dataset(const std::string& path) {
  return parse_dataset(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Network and model JSON blocks shared by checkpoints and model files.

inline json mlp_to_json(const MlpParams& p) {
  json wl = json::array();
  json bl = json::array();
  for (std::size_t i = 0; i < p.n_layers(); ++i) {
    wl.push_back(p.weights[i].data);
    bl.push_back(p.biases[i]);
  }
  return {{"layer_dims", p.layer_dims},
          {"activation", to_string(p.activation)},
          {"weights", wl},
          {"biases", bl}};
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "tanh") return Activation::Tanh;
  throw DataError("unknown activation '" + s + "'");
}

inline MlpParams mlp_from_json(const json& j) {
  if (!j.is_object() || !j.contains("layer_dims") || !j.contains("weights") ||
      !j.contains("biases") || !j.contains("activation"))
    throw DataError("network block missing required fields");
  MlpParams p;
  p.layer_dims = j["layer_dims"].get<std::vector<std::size_t>>();
  p.activation = activation_from_string(j["activation"].get<std::string>());
  if (p.layer_dims.size() < 2)
    throw DataError("network block: need at least two layer dims");
  const json& wl = j["weights"];
  const json& bl = j["biases"];
  if (wl.size() + 1 != p.layer_dims.size() || bl.size() != wl.size())
    throw DataError("network block: layer count mismatch");
  for (std::size_t i = 0; i + 1 < p.layer_dims.size(); ++i) {
    DenseMatrix w(p.layer_dims[i], p.layer_dims[i + 1]);
    const std::vector<double> flat = wl[i].get<std::vector<double>>();
    if (flat.size() != w.data.size())
      throw DataError("network block: weight size mismatch at layer " +
                      std::to_string(i));
    w.data = flat;
    std::vector<double> b = bl[i].get<std::vector<double>>();
    if (b.size() != p.layer_dims[i + 1])
      throw DataError("network block: bias size mismatch at layer " +
                      std::to_string(i));
    if (!all_finite(w.data) || !all_finite(b))
      throw DataError("network block: non-finite parameter");
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  return p;
}

inline json linear_head_to_json(const LinearHead& h) {
  return {{"weights", h.weights}, {"intercept", h.intercept}};
}

inline LinearHead linear_head_from_json(const json& j) {
  LinearHead h;
  h.weights = j.at("weights").get<std::vector<double>>();
  h.intercept = j.at("intercept").get<double>();
  return h;
}

inline json reward_spec_to_json(const RewardSpec& spec) {
  json j;
  j["preferences"] = {{"sessions", spec.preferences.sessions},
                      {"clicks", spec.preferences.clicks},
                      {"volume", spec.preferences.volume}};
  j["use_predicted_clicks"] = spec.use_predicted_clicks;
  j["use_predicted_sessions"] = spec.use_predicted_sessions;
  if (spec.click_model) {
    j["click_model"] = {{"weights", spec.click_model->weights},
                        {"intercept", spec.click_model->intercept}};
  } else {
    j["click_model"] = nullptr;
  }
  if (spec.session_model) {
    j["session_model"] = {
        {"not_send", linear_head_to_json(spec.session_model->heads[0])},
        {"send", linear_head_to_json(spec.session_model->heads[1])}};
  } else {
    j["session_model"] = nullptr;
  }
  return j;
}

inline RewardSpec reward_spec_from_json(const json& j,
                                        const std::vector<std::string>& schema) {
  RewardSpec spec;
  const json& prefs = j.at("preferences");
  spec.preferences.sessions = prefs.at("sessions").get<double>();
  spec.preferences.clicks = prefs.at("clicks").get<double>();
  spec.preferences.volume = prefs.at("volume").get<double>();
  spec.use_predicted_clicks = j.value("use_predicted_clicks", false);
  spec.use_predicted_sessions = j.value("use_predicted_sessions", false);
  if (j.contains("click_model") && !j["click_model"].is_null()) {
    ClickModel m;
    m.feature_schema = schema;
    m.weights = j["click_model"].at("weights").get<std::vector<double>>();
    m.intercept = j["click_model"].at("intercept").get<double>();
    spec.click_model = std::move(m);
  }
  if (j.contains("session_model") && !j["session_model"].is_null()) {
    SessionModel m;
    m.feature_schema = schema;
    m.heads[0] = linear_head_from_json(j["session_model"].at("not_send"));
    m.heads[1] = linear_head_from_json(j["session_model"].at("send"));
    spec.session_model = std::move(m);
  }
  return spec;
}

inline json train_config_to_json(const TrainConfig& c) {
  return {{"gamma", c.gamma},
          {"alpha", c.alpha},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"target_sync_every", c.target_sync_every},
          {"learning_rate", c.learning_rate},
          {"hidden_dims", c.hidden_dims},
          {"activation", to_string(c.activation)},
          {"optimizer", c.optimizer == OptKind::SgdMomentum ? "sgd_momentum"
                                                            : "sgd"},
          {"momentum", c.momentum},
          {"target", to_string(c.target_kind)},
          {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.gamma = j.at("gamma").get<double>();
  c.alpha = j.at("alpha").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.target_sync_every = j.at("target_sync_every").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
  c.activation = activation_from_string(j.at("activation").get<std::string>());
  const std::string opt = j.at("optimizer").get<std::string>();
  if (opt == "sgd")
    c.optimizer = OptKind::Sgd;
  else if (opt == "sgd_momentum")
    c.optimizer = OptKind::SgdMomentum;
  else
    throw DataError("unknown optimizer '" + opt + "'");
  c.momentum = j.at("momentum").get<double>();
  const std::string tk = j.at("target").get<std::string>();
  if (tk == "dqn")
    c.target_kind = TargetKind::Dqn;
  else if (tk == "ddqn")
    c.target_kind = TargetKind::Ddqn;
  else
    throw DataError("unknown target kind '" + tk + "'");
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

// ---------------------------------------------------------------------------
// Checkpoint: one JSON object holding the policy (network + input transform +
// schema), the reward spec it was trained under, the training config and the
// config digest.

struct Checkpoint {
  QPolicy policy;
  RewardSpec reward_spec;
  TrainConfig train_config;
  std::string config_digest;
  std::string tool_version{kVersion};
};

inline std::string checkpoint_to_string(const Checkpoint& c) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "checkpoint";
  j["feature_schema"] = c.policy.feature_schema;
  j["transform"] = {{"center", c.policy.transform.center},
                    {"scale", c.policy.transform.scale}};
  j["network"] = mlp_to_json(c.policy.params);
  j["reward_spec"] = reward_spec_to_json(c.reward_spec);
  j["train_config"] = train_config_to_json(c.train_config);
  j["config_digest"] = c.config_digest;
  j["tool_version"] = c.tool_version;
  return j.dump(2) + "\n";
}

inline Checkpoint checkpoint_from_string(std::string_view content) {
  json j;
  try {
    j = json::parse(content);
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: invalid JSON: ") + e.what());
  }
  try {
    if (j.value("kind", "") != "checkpoint")
      throw DataError("checkpoint: wrong or missing 'kind'");
    if (j.at("format_version").get<int>() != kFormatVersion)
      throw DataError("checkpoint: unsupported format_version");
    Checkpoint c;
    c.policy.feature_schema =
        j.at("feature_schema").get<std::vector<std::string>>();
    c.policy.transform.center =
        j.at("transform").at("center").get<std::vector<double>>();
    c.policy.transform.scale =
        j.at("transform").at("scale").get<std::vector<double>>();
    if (c.policy.transform.center.size() != c.policy.feature_schema.size() ||
        c.policy.transform.scale.size() != c.policy.feature_schema.size())
      throw DataError("checkpoint: transform dimension mismatch");
    for (double s : c.policy.transform.scale)
      if (!(s > 0.0)) throw DataError("checkpoint: non-positive scale");
    c.policy.params = mlp_from_json(j.at("network"));
    if (c.policy.params.input_dim() != c.policy.feature_schema.size())
      throw DataError("checkpoint: network input dim does not match schema");
    if (c.policy.params.output_dim() != kNumActions)
      throw DataError("checkpoint: network must output one Q per action");
    c.reward_spec =
        reward_spec_from_json(j.at("reward_spec"), c.policy.feature_schema);
    c.train_config = train_config_from_json(j.at("train_config"));
    c.config_digest = j.value("config_digest", "");
    c.tool_version = j.value("tool_version", "");
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: malformed: ") + e.what());
  }
}

inline void write_checkpoint(const Checkpoint& c, const std::string& path) {
  write_text_file(path, checkpoint_to_string(c));
}

inline Checkpoint read_checkpoint(const std::string& path) {
  return checkpoint_from_string(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Fitted reward-model bundle written by the fit command and consumed by
// training when predicted substitutions are enabled.

struct RewardModelBundle {
  std::vector<std::string> feature_schema;
  ClickModel click_model;
  SessionModel session_model;
  FitDiagnostics click_diag;
  FitDiagnostics session_diag;
  std::string config_digest;
};

inline std::string reward_models_to_string(const RewardModelBundle& b) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "reward_models";
  j["feature_schema"] = b.feature_schema;
  j["click_model"] = {{"weights", b.click_model.weights},
                      {"intercept", b.click_model.intercept}};
  j["session_model"] = {
      {"not_send", linear_head_to_json(b.session_model.heads[0])},
      {"send", linear_head_to_json(b.session_model.heads[1])}};
  j["diagnostics"] = {
      {"click",
       {{"n_rows", b.click_diag.n_rows},
        {"final_loss", b.click_diag.final_loss},
        {"iters", b.click_diag.iters}}},
      {"session",
       {{"n_rows", b.session_diag.n_rows},
        {"mean_squared_error", b.session_diag.final_loss}}}};
  j["config_digest"] = b.config_digest;
  j["tool_version"] = std::string(kVersion);
  return j.dump(2) + "\n";
}

inline RewardModelBundle reward_models_from_string(std::string_view content) {
  json j;
  try {
    j = json::parse(content);
  } catch (const json::exception& e) {
    throw DataError(std::string("reward models: invalid JSON: ") + e.what());
  }
  try {
    if (j.value("kind", "") != "reward_models")
      throw DataError("reward models: wrong or missing 'kind'");
    RewardModelBundle b;
    b.feature_schema = j.at("feature_schema").get<std::vector<std::string>>();
    b.click_model.feature_schema = b.feature_schema;
    b.click_model.weights =
        j.at("click_model").at("weights").get<std::vector<double>>();
    b.click_model.intercept = j.at("click_model").at("intercept").get<double>();
    b.session_model.feature_schema = b.feature_schema;
    b.session_model.heads[0] =
        linear_head_from_json(j.at("session_model").at("not_send"));
    b.session_model.heads[1] =
        linear_head_from_json(j.at("session_model").at("send"));
    b.config_digest = j.value("config_digest", "");
    return b;
  } catch (const json::exception& e) {
    throw DataError(std::string("reward models: malformed: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Run config. Sections are optional and default-constructed; unknown keys
// anywhere are hard errors so typos cannot silently revert to defaults.

struct RewardSection {
  PreferenceVector preferences{1.0, 0.4, 0.05};
  bool use_predicted_clicks = false;
  bool use_predicted_sessions = false;
};

struct OpeSection {
  EstimatorKind estimator = EstimatorKind::PerDecisionIs;
  Smoothing smoothing;
  bool self_normalized = false;
};

struct SweepSection {
  std::vector<PreferenceVector> preferences;
  std::vector<double> alphas;
  std::vector<double> gammas;
  std::vector<double> learning_rates;
  std::size_t replications = 1;
  std::uint64_t seed_base = 0;
  bool seed_base_set = false;
};

struct PipelineConfig {
  SimConfig sim;
  RewardSection reward;
  TrainConfig train;
  OpeSection ope;
  SweepSection sweep;
  std::string digest;
};

namespace cfgdetail {

inline void require_keys(const json& obj, const std::string& path,
                         std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object())
    throw ConfigError("config: '" + path + "' must be an object");
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (std::string_view k : allowed)
      if (item.key() == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw ConfigError("config: unknown key '" +
                        (path.empty() ? item.key() : path + "." + item.key()) +
                        "'");
  }
}

inline double get_double(const json& obj, const std::string& path,
                         const char* key, double def) {
  if (!obj.contains(key)) return def;
  if (!obj[key].is_number())
    throw ConfigError("config: '" + path + "." + key + "' must be a number");
  return obj[key].get<double>();
}

inline std::size_t get_size(const json& obj, const std::string& path,
                            const char* key, std::size_t def) {
  if (!obj.contains(key)) return def;
  if (!obj[key].is_number_unsigned() && !obj[key].is_number_integer())
    throw ConfigError("config: '" + path + "." + key +
                      "' must be a non-negative integer");
  const long long v = obj[key].get<long long>();
  if (v < 0)
    throw ConfigError("config: '" + path + "." + key +
                      "' must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

inline std::uint64_t get_u64(const json& obj, const std::string& path,
                             const char* key, std::uint64_t def) {
  if (!obj.contains(key)) return def;
  if (!obj[key].is_number_unsigned() && !obj[key].is_number_integer())
    throw ConfigError("config: '" + path + "." + key +
                      "' must be a non-negative integer");
  const long long v = obj[key].get<long long>();
  if (v < 0)
    throw ConfigError("config: '" + path + "." + key +
                      "' must be a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

inline bool get_bool(const json& obj, const std::string& path, const char* key,
                     bool def) {
  if (!obj.contains(key)) return def;
  if (!obj[key].is_boolean())
    throw ConfigError("config: '" + path + "." + key + "' must be a boolean");
  return obj[key].get<bool>();
}

inline std::string get_string(const json& obj, const std::string& path,
                              const char* key, const std::string& def) {
  if (!obj.contains(key)) return def;
  if (!obj[key].is_string())
    throw ConfigError("config: '" + path + "." + key + "' must be a string");
  return obj[key].get<std::string>();
}

inline PreferenceVector parse_preferences(const json& obj,
                                          const std::string& path) {
  require_keys(obj, path, {"sessions", "clicks", "volume"});
  PreferenceVector w;
  w.sessions = get_double(obj, path, "sessions", 0.0);
  w.clicks = get_double(obj, path, "clicks", 0.0);
  w.volume = get_double(obj, path, "volume", 0.0);
  return w;
}

inline SimConfig parse_sim(const json& obj, const SimConfig& defaults) {
  SimConfig c = defaults;
  require_keys(obj, "sim",
               {"n_users", "horizon_days", "candidate_rate_per_day", "epsilon",
                "seed", "population", "dynamics", "baseline"});
  c.n_users = get_size(obj, "sim", "n_users", c.n_users);
  c.horizon_days = get_double(obj, "sim", "horizon_days", c.horizon_days);
  c.candidate_rate_per_day =
      get_double(obj, "sim", "candidate_rate_per_day", c.candidate_rate_per_day);
  c.epsilon = get_double(obj, "sim", "epsilon", c.epsilon);
  c.seed = get_u64(obj, "sim", "seed", c.seed);
  if (obj.contains("population")) {
    const json& p = obj["population"];
    require_keys(p, "sim.population",
                 {"visit_rate_mean", "visit_rate_log_sigma", "affinity_mean",
                  "affinity_sigma", "boost_mean", "boost_log_sigma",
                  "disable_mean", "disable_log_sigma", "profile_noise_sigma"});
    PopulationConfig& pc = c.population;
    pc.visit_rate_mean =
        get_double(p, "sim.population", "visit_rate_mean", pc.visit_rate_mean);
    pc.visit_rate_log_sigma = get_double(p, "sim.population",
                                         "visit_rate_log_sigma",
                                         pc.visit_rate_log_sigma);
    pc.affinity_mean =
        get_double(p, "sim.population", "affinity_mean", pc.affinity_mean);
    pc.affinity_sigma =
        get_double(p, "sim.population", "affinity_sigma", pc.affinity_sigma);
    pc.boost_mean = get_double(p, "sim.population", "boost_mean", pc.boost_mean);
    pc.boost_log_sigma =
        get_double(p, "sim.population", "boost_log_sigma", pc.boost_log_sigma);
    pc.disable_mean =
        get_double(p, "sim.population", "disable_mean", pc.disable_mean);
    pc.disable_log_sigma = get_double(p, "sim.population", "disable_log_sigma",
                                      pc.disable_log_sigma);
    pc.profile_noise_sigma = get_double(p, "sim.population",
                                        "profile_noise_sigma",
                                        pc.profile_noise_sigma);
  }
  if (obj.contains("dynamics")) {
    const json& d = obj["dynamics"];
    require_keys(d, "sim.dynamics",
                 {"fatigue_per_send", "fatigue_half_life_hours",
                  "click_fatigue_coeff", "click_disable_coeff",
                  "visit_fatigue_coeff", "visit_disable_coeff",
                  "boost_half_life_hours", "click_visit_delay_hours",
                  "click_opens_session", "noise_visit_rate_per_day",
                  "quality_mean", "quality_sigma"});
    DynamicsConfig& dc = c.dynamics;
    dc.fatigue_per_send =
        get_double(d, "sim.dynamics", "fatigue_per_send", dc.fatigue_per_send);
    dc.fatigue_half_life_hours =
        get_double(d, "sim.dynamics", "fatigue_half_life_hours",
                   dc.fatigue_half_life_hours);
    dc.click_fatigue_coeff = get_double(d, "sim.dynamics", "click_fatigue_coeff",
                                        dc.click_fatigue_coeff);
    dc.click_disable_coeff = get_double(d, "sim.dynamics", "click_disable_coeff",
                                        dc.click_disable_coeff);
    dc.visit_fatigue_coeff = get_double(d, "sim.dynamics", "visit_fatigue_coeff",
                                        dc.visit_fatigue_coeff);
    dc.visit_disable_coeff = get_double(d, "sim.dynamics", "visit_disable_coeff",
                                        dc.visit_disable_coeff);
    dc.boost_half_life_hours = get_double(d, "sim.dynamics",
                                          "boost_half_life_hours",
                                          dc.boost_half_life_hours);
    dc.click_visit_delay_hours = get_double(d, "sim.dynamics",
                                            "click_visit_delay_hours",
                                            dc.click_visit_delay_hours);
    dc.click_opens_session = get_bool(d, "sim.dynamics", "click_opens_session",
                                      dc.click_opens_session);
    dc.noise_visit_rate_per_day = get_double(d, "sim.dynamics",
                                             "noise_visit_rate_per_day",
                                             dc.noise_visit_rate_per_day);
    dc.quality_mean =
        get_double(d, "sim.dynamics", "quality_mean", dc.quality_mean);
    dc.quality_sigma =
        get_double(d, "sim.dynamics", "quality_sigma", dc.quality_sigma);
  }
  if (obj.contains("baseline")) {
    const json& b = obj["baseline"];
    require_keys(b, "sim.baseline", {"beta", "lambda", "session_lift_scale"});
    c.baseline.beta = get_double(b, "sim.baseline", "beta", c.baseline.beta);
    c.baseline.lambda =
        get_double(b, "sim.baseline", "lambda", c.baseline.lambda);
    c.baseline.session_lift_scale = get_double(
        b, "sim.baseline", "session_lift_scale", c.baseline.session_lift_scale);
  }
  return c;
}

inline TrainConfig parse_train(const json& obj, const TrainConfig& defaults) {
  TrainConfig c = defaults;
  require_keys(obj, "train",
               {"gamma", "alpha", "batch_size", "epochs", "target_sync_every",
                "learning_rate", "hidden_dims", "activation", "optimizer",
                "momentum", "target", "seed"});
  c.gamma = get_double(obj, "train", "gamma", c.gamma);
  c.alpha = get_double(obj, "train", "alpha", c.alpha);
  c.batch_size = get_size(obj, "train", "batch_size", c.batch_size);
  c.epochs = get_size(obj, "train", "epochs", c.epochs);
  c.target_sync_every =
      get_size(obj, "train", "target_sync_every", c.target_sync_every);
  c.learning_rate = get_double(obj, "train", "learning_rate", c.learning_rate);
  if (obj.contains("hidden_dims")) {
    if (!obj["hidden_dims"].is_array())
      throw ConfigError("config: 'train.hidden_dims' must be an array");
    c.hidden_dims.clear();
    for (const json& v : obj["hidden_dims"]) {
      if (!v.is_number_unsigned() && !v.is_number_integer())
        throw ConfigError("config: 'train.hidden_dims' entries must be "
                          "positive integers");
      const long long h = v.get<long long>();
      if (h <= 0)
        throw ConfigError("config: 'train.hidden_dims' entries must be "
                          "positive integers");
      c.hidden_dims.push_back(static_cast<std::size_t>(h));
    }
  }
  const std::string act =
      get_string(obj, "train", "activation", to_string(c.activation));
  if (act == "relu")
    c.activation = Activation::ReLU;
  else if (act == "tanh")
    c.activation = Activation::Tanh;
  else
    throw ConfigError("config: 'train.activation' must be 'relu' or 'tanh'");
  const std::string opt = get_string(
      obj, "train", "optimizer",
      c.optimizer == OptKind::SgdMomentum ? "sgd_momentum" : "sgd");
  if (opt == "sgd")
    c.optimizer = OptKind::Sgd;
  else if (opt == "sgd_momentum")
    c.optimizer = OptKind::SgdMomentum;
  else
    throw ConfigError("config: 'train.optimizer' must be 'sgd' or "
                      "'sgd_momentum'");
  c.momentum = get_double(obj, "train", "momentum", c.momentum);
  const std::string tk =
      get_string(obj, "train", "target", to_string(c.target_kind));
  if (tk == "dqn")
    c.target_kind = TargetKind::Dqn;
  else if (tk == "ddqn")
    c.target_kind = TargetKind::Ddqn;
  else
    throw ConfigError("config: 'train.target' must be 'dqn' or 'ddqn'");
  c.seed = get_u64(obj, "train", "seed", c.seed);
  return c;
}

inline RewardSection parse_reward(const json& obj,
                                  const RewardSection& defaults) {
  RewardSection r = defaults;
  require_keys(obj, "reward",
               {"preferences", "use_predicted_clicks",
                "use_predicted_sessions"});
  if (obj.contains("preferences"))
    r.preferences = parse_preferences(obj["preferences"], "reward.preferences");
  r.use_predicted_clicks =
      get_bool(obj, "reward", "use_predicted_clicks", r.use_predicted_clicks);
  r.use_predicted_sessions = get_bool(obj, "reward", "use_predicted_sessions",
                                      r.use_predicted_sessions);
  return r;
}

inline OpeSection parse_ope(const json& obj, const OpeSection& defaults) {
  OpeSection o = defaults;
  require_keys(obj, "ope",
               {"estimator", "smoothing", "epsilon", "temperature",
                "self_normalized"});
  const std::string est =
      get_string(obj, "ope", "estimator", to_string(o.estimator));
  if (est == "trajectory_is")
    o.estimator = EstimatorKind::TrajectoryIs;
  else if (est == "per_decision_is")
    o.estimator = EstimatorKind::PerDecisionIs;
  else if (est == "one_step_is")
    o.estimator = EstimatorKind::OneStepIs;
  else
    throw ConfigError("config: 'ope.estimator' must be one of trajectory_is, "
                      "per_decision_is, one_step_is");
  const std::string sm = get_string(
      obj, "ope", "smoothing",
      o.smoothing.kind == Smoothing::Kind::Softmax ? "softmax"
                                                   : "epsilon_greedy");
  if (sm == "epsilon_greedy")
    o.smoothing.kind = Smoothing::Kind::EpsilonGreedy;
  else if (sm == "softmax")
    o.smoothing.kind = Smoothing::Kind::Softmax;
  else
    throw ConfigError("config: 'ope.smoothing' must be 'epsilon_greedy' or "
                      "'softmax'");
  o.smoothing.epsilon = get_double(obj, "ope", "epsilon", o.smoothing.epsilon);
  o.smoothing.temperature =
      get_double(obj, "ope", "temperature", o.smoothing.temperature);
  o.self_normalized =
      get_bool(obj, "ope", "self_normalized", o.self_normalized);
  return o;
}

inline SweepSection parse_sweep(const json& obj) {
  SweepSection s;
  require_keys(obj, "sweep",
               {"preferences", "alphas", "gammas", "learning_rates",
                "replications", "seed_base"});
  if (obj.contains("preferences")) {
    if (!obj["preferences"].is_array())
      throw ConfigError("config: 'sweep.preferences' must be an array");
    for (const json& p : obj["preferences"])
      s.preferences.push_back(parse_preferences(p, "sweep.preferences[]"));
  }
  auto list = [&](const char* key) {
    std::vector<double> out;
    if (!obj.contains(key)) return out;
    if (!obj[key].is_array())
      throw ConfigError(std::string("config: 'sweep.") + key +
                        "' must be an array");
    for (const json& v : obj[key]) {
      if (!v.is_number())
        throw ConfigError(std::string("config: 'sweep.") + key +
                          "' entries must be numbers");
      out.push_back(v.get<double>());
    }
    return out;
  };
  s.alphas = list("alphas");
  s.gammas = list("gammas");
  s.learning_rates = list("learning_rates");
  s.replications = get_size(obj, "sweep", "replications", s.replications);
  if (obj.contains("seed_base")) {
    s.seed_base = get_u64(obj, "sweep", "seed_base", 0);
    s.seed_base_set = true;
  }
  return s;
}

}  // namespace cfgdetail

inline PipelineConfig parse_config(std::string_view content) {
  json j;
  try {
    j = json::parse(content);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  cfgdetail::require_keys(j, "", {"sim", "reward", "train", "ope", "sweep"});
  PipelineConfig c;
  if (j.contains("sim")) c.sim = cfgdetail::parse_sim(j["sim"], c.sim);
  if (j.contains("reward"))
    c.reward = cfgdetail::parse_reward(j["reward"], c.reward);
  if (j.contains("train")) c.train = cfgdetail::parse_train(j["train"], c.train);
  if (j.contains("ope")) c.ope = cfgdetail::parse_ope(j["ope"], c.ope);
  if (j.contains("sweep")) c.sweep = cfgdetail::parse_sweep(j["sweep"]);
  // Sweep axes default to the single configured value so an empty sweep
  // section means "one cell".
  if (c.sweep.preferences.empty())
    c.sweep.preferences.push_back(c.reward.preferences);
  if (c.sweep.alphas.empty()) c.sweep.alphas.push_back(c.train.alpha);
  if (c.sweep.gammas.empty()) c.sweep.gammas.push_back(c.train.gamma);
  if (c.sweep.learning_rates.empty())
    c.sweep.learning_rates.push_back(c.train.learning_rate);
  if (!c.sweep.seed_base_set) c.sweep.seed_base = c.train.seed;
  if (c.sweep.replications == 0)
    throw ConfigError("config: 'sweep.replications' must be >= 1");
  c.digest = content_digest(content);
  validate(c.sim);
  validate(c.train);
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  std::string content;
  try {
    content = read_text_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());  // missing config file is a usage error
  }
  return parse_config(content);
}

// ---------------------------------------------------------------------------
// CSV helpers and run manifests.

inline std::string csv_join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out.push_back(',');
    out += cells[i];
  }
  out.push_back('\n');
  return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

struct RunManifest {
  std::string command;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, digest
  std::vector<std::pair<std::string, std::string>> outputs;  // path, digest
};

inline std::string manifest_to_string(const RunManifest& m) {
  json j;
  j["command"] = m.command;
  j["config_digest"] = m.config_digest;
  j["seed"] = m.seed;
  json in = json::array(), out = json::array();
  for (const auto& [p, d] : m.inputs)
    in.push_back({{"path", p}, {"digest", d}});
  for (const auto& [p, d] : m.outputs)
    out.push_back({{"path", p}, {"digest", d}});
  j["inputs"] = in;
  j["outputs"] = out;
  j["tool_version"] = std::string(kVersion);
  return j.dump(2) + "\n";
}

inline void write_manifest(const RunManifest& m, const std::string& out_path) {
  write_text_file(out_path + ".manifest.json", manifest_to_string(m));
}

}  // namespace notirl
