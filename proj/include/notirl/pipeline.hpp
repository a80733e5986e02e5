#pragma once

#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "notirl/io.hpp"

namespace notirl {

// Command implementations behind the CLI. Each one loads inputs, runs the
// library, writes its primary output plus a run manifest listing input and
// output content digests, and returns a summary the tests can poke at.

struct GenDataSummary {
  std::size_t n_trajectories = 0;
  std::size_t n_transitions = 0;
};

inline GenDataSummary cmd_gen_data(const std::string& config_path,
                                   const std::string& out_path,
                                   std::optional<std::uint64_t> seed_override) {
  PipelineConfig cfg = load_config(config_path);
  if (seed_override) cfg.sim.seed = *seed_override;
  Dataset ds = generate_dataset(cfg.sim);
  ds.provenance.config_digest = cfg.digest;
  write_dataset(ds, out_path);

  RunManifest m;
  m.command = "gen-data";
  m.config_digest = cfg.digest;
  m.seed = cfg.sim.seed;
  m.inputs = {{config_path, content_digest(read_text_file(config_path))}};
  m.outputs = {{out_path, content_digest(read_text_file(out_path))}};
  write_manifest(m, out_path);
  return {ds.trajectories.size(), ds.n_transitions()};
}

inline RewardModelBundle cmd_fit_reward_models(const std::string& config_path,
                                               const std::string& dataset_path,
                                               const std::string& out_path) {
  PipelineConfig cfg = load_config(config_path);
  Dataset ds = read_dataset(dataset_path);
  RewardModelBundle bundle;
  bundle.feature_schema = ds.feature_schema;
  bundle.click_model = fit_click_model(ds, {}, &bundle.click_diag);
  bundle.session_model = fit_session_model(ds, &bundle.session_diag);
  bundle.config_digest = cfg.digest;
  write_text_file(out_path, reward_models_to_string(bundle));

  RunManifest m;
  m.command = "fit-rewards";
  m.config_digest = cfg.digest;
  m.seed = cfg.train.seed;
  m.inputs = {{config_path, content_digest(read_text_file(config_path))},
              {dataset_path, content_digest(read_text_file(dataset_path))}};
  m.outputs = {{out_path, content_digest(read_text_file(out_path))}};
  write_manifest(m, out_path);
  return bundle;
}

namespace pipedetail {

inline RewardSpec assemble_reward_spec(const PipelineConfig& cfg,
                                       const Dataset& ds,
                                       const std::string& models_path) {
  RewardSpec spec;
  spec.preferences = cfg.reward.preferences;
  spec.use_predicted_clicks = cfg.reward.use_predicted_clicks;
  spec.use_predicted_sessions = cfg.reward.use_predicted_sessions;
  if (!models_path.empty()) {
    const RewardModelBundle bundle =
        reward_models_from_string(read_text_file(models_path));
    if (bundle.feature_schema != ds.feature_schema)
      throw DataError("reward models schema does not match dataset");
    spec.click_model = bundle.click_model;
    spec.session_model = bundle.session_model;
  } else if (spec.use_predicted_clicks || spec.use_predicted_sessions) {
    throw ConfigError("predicted rewards requested; pass --models with a "
                      "fitted reward-model file");
  }
  return spec;
}

inline json train_report_to_json(const TrainReport& r) {
  json steps = json::array();
  for (const TrainReport::StepRecord& s : r.steps)
    steps.push_back({{"step", s.step},
                     {"bellman_mse", s.bellman_mse},
                     {"cql_penalty", s.cql_penalty},
                     {"total_loss", s.total_loss}});
  json epochs = json::array();
  for (const TrainReport::EpochRecord& e : r.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"at_step", e.at_step},
                      {"mean_data_q", e.mean_data_q},
                      {"mean_logsumexp_q", e.mean_logsumexp_q}});
  return {{"dataset_size", r.dataset_size},
          {"n_steps", r.n_steps},
          {"steps", steps},
          {"epochs", epochs}};
}

inline std::string train_report_to_csv(const TrainReport& r) {
  std::string out = csv_join({"step", "bellman_mse", "cql_penalty",
                              "total_loss", "epoch", "mean_data_q",
                              "mean_logsumexp_q"});
  std::size_t next_epoch = 0;
  for (const TrainReport::StepRecord& s : r.steps) {
    std::vector<std::string> row = {
        std::to_string(s.step), format_double(s.bellman_mse),
        format_double(s.cql_penalty), format_double(s.total_loss), "", "", ""};
    if (next_epoch < r.epochs.size() &&
        r.epochs[next_epoch].at_step == s.step) {
      row[4] = std::to_string(r.epochs[next_epoch].epoch);
      row[5] = format_double(r.epochs[next_epoch].mean_data_q);
      row[6] = format_double(r.epochs[next_epoch].mean_logsumexp_q);
      ++next_epoch;
    }
    out += csv_join(row);
  }
  return out;
}

inline json estimate_to_json(const OpeEstimate& e) {
  return {{"estimator", to_string(e.kind)},
          {"value", e.value},
          {"stderr", e.stderr_},
          {"ess", e.ess},
          {"n_units", e.n_units},
          {"self_normalized", e.self_normalized},
          {"max_weight", e.diagnostics.max_weight},
          {"mean_weight", e.diagnostics.mean_weight},
          {"weight_variance", e.diagnostics.weight_variance},
          {"top_weight_share", e.diagnostics.top_share}};
}

inline std::vector<std::string> estimate_to_csv_row(const std::string& metric,
                                                    const OpeEstimate& e) {
  return {metric,
          to_string(e.kind),
          format_double(e.value),
          format_double(e.stderr_),
          format_double(e.ess),
          std::to_string(e.n_units),
          format_double(e.diagnostics.max_weight),
          format_double(e.diagnostics.mean_weight),
          format_double(e.diagnostics.weight_variance),
          format_double(e.diagnostics.top_share),
          e.self_normalized ? "1" : "0"};
}

}  // namespace pipedetail

struct TrainSummary {
  std::string checkpoint_path;
  std::string report_path;
  double final_total_loss = 0.0;
  std::size_t n_steps = 0;
};

inline TrainSummary cmd_train(const std::string& config_path,
                              const std::string& dataset_path,
                              const std::string& models_path,
                              const std::string& out_path,
                              std::optional<std::uint64_t> seed_override,
                              const std::string& format = "json") {
  if (format != "json" && format != "csv")
    throw ConfigError("train: --format must be 'json' or 'csv'");
  PipelineConfig cfg = load_config(config_path);
  Dataset ds = read_dataset(dataset_path);
  TrainConfig tc = cfg.train;
  if (seed_override) tc.seed = *seed_override;

  const RewardSpec spec =
      pipedetail::assemble_reward_spec(cfg, ds, models_path);
  const std::vector<std::vector<double>> rewards =
      build_scalar_rewards(ds, spec);
  auto [policy, report] = train(ds, rewards, tc);

  Checkpoint ck;
  ck.policy = std::move(policy);
  ck.reward_spec = spec;
  ck.train_config = tc;
  ck.config_digest = cfg.digest;
  write_checkpoint(ck, out_path);

  const std::string report_path =
      out_path + (format == "csv" ? ".report.csv" : ".report.json");
  if (format == "csv")
    write_text_file(report_path, pipedetail::train_report_to_csv(report));
  else
    write_text_file(report_path,
                    pipedetail::train_report_to_json(report).dump(2) + "\n");

  RunManifest m;
  m.command = "train";
  m.config_digest = cfg.digest;
  m.seed = tc.seed;
  m.inputs = {{config_path, content_digest(read_text_file(config_path))},
              {dataset_path, content_digest(read_text_file(dataset_path))}};
  if (!models_path.empty())
    m.inputs.push_back(
        {models_path, content_digest(read_text_file(models_path))});
  m.outputs = {{out_path, content_digest(read_text_file(out_path))},
               {report_path, content_digest(read_text_file(report_path))}};
  write_manifest(m, out_path);

  TrainSummary s;
  s.checkpoint_path = out_path;
  s.report_path = report_path;
  s.n_steps = report.n_steps;
  if (!report.steps.empty()) s.final_total_loss = report.steps.back().total_loss;
  return s;
}

inline PolicyMetricEstimates cmd_evaluate(const std::string& config_path,
                                          const std::string& dataset_path,
                                          const std::string& checkpoint_path,
                                          const std::string& out_path,
                                          const std::string& format = "json") {
  if (format != "json" && format != "csv")
    throw ConfigError("evaluate: --format must be 'json' or 'csv'");
  PipelineConfig cfg = load_config(config_path);
  Dataset ds = read_dataset(dataset_path);
  Checkpoint ck = read_checkpoint(checkpoint_path);
  // The estimand discount matches the objective the policy was trained for.
  const double gamma = ck.train_config.gamma;
  const PolicyMetricEstimates est = evaluate_policy_metrics(
      ds, ck.policy, cfg.ope.smoothing, cfg.reward.preferences, gamma,
      cfg.ope.estimator, cfg.ope.self_normalized);

  if (format == "json") {
    json j;
    j["gamma"] = gamma;
    j["n_trajectories"] = ds.trajectories.size();
    j["preferences"] = {{"sessions", cfg.reward.preferences.sessions},
                        {"clicks", cfg.reward.preferences.clicks},
                        {"volume", cfg.reward.preferences.volume}};
    j["estimates"] = {{"sessions", pipedetail::estimate_to_json(est.sessions)},
                      {"clicks", pipedetail::estimate_to_json(est.clicks)},
                      {"volume", pipedetail::estimate_to_json(est.volume)},
                      {"scalarized",
                       pipedetail::estimate_to_json(est.scalarized)}};
    j["config_digest"] = cfg.digest;
    write_text_file(out_path, j.dump(2) + "\n");
  } else {
    std::string out = csv_join({"metric", "estimator", "value", "stderr",
                                "ess", "n_units", "max_weight", "mean_weight",
                                "weight_variance", "top_weight_share",
                                "self_normalized"});
    out += csv_join(pipedetail::estimate_to_csv_row("sessions", est.sessions));
    out += csv_join(pipedetail::estimate_to_csv_row("clicks", est.clicks));
    out += csv_join(pipedetail::estimate_to_csv_row("volume", est.volume));
    out += csv_join(
        pipedetail::estimate_to_csv_row("scalarized", est.scalarized));
    write_text_file(out_path, out);
  }

  RunManifest m;
  m.command = "evaluate";
  m.config_digest = cfg.digest;
  m.seed = ck.train_config.seed;
  m.inputs = {{config_path, content_digest(read_text_file(config_path))},
              {dataset_path, content_digest(read_text_file(dataset_path))},
              {checkpoint_path,
               content_digest(read_text_file(checkpoint_path))}};
  m.outputs = {{out_path, content_digest(read_text_file(out_path))}};
  write_manifest(m, out_path);
  return est;
}

inline PolicyValue cmd_eval_sim(const std::string& config_path,
                                const std::string& checkpoint_path,
                                const std::string& out_path,
                                std::size_t episodes,
                                std::optional<std::uint64_t> seed_override,
                                double eval_epsilon = 0.0,
                                const std::string& format = "json") {
  if (format != "json" && format != "csv")
    throw ConfigError("eval-sim: --format must be 'json' or 'csv'");
  if (!(eval_epsilon >= 0.0) || eval_epsilon > 1.0)
    throw ConfigError("eval-sim: --eval-epsilon must lie in [0, 1]");
  PipelineConfig cfg = load_config(config_path);
  Checkpoint ck = read_checkpoint(checkpoint_path);
  if (ck.policy.feature_schema != default_feature_schema())
    throw DataError("eval-sim: checkpoint schema does not match the "
                    "simulator's feature schema");
  PolicyFn policy = greedy_policy_fn(ck.policy);
  if (eval_epsilon > 0.0)
    policy = epsilon_greedy_policy(std::move(policy), eval_epsilon);
  const std::uint64_t seed = seed_override.value_or(cfg.sim.seed);
  const PolicyValue pv =
      true_policy_value(policy, cfg.sim, episodes, ck.train_config.gamma,
                        cfg.reward.preferences, seed);

  if (format == "json") {
    json j;
    j["n_episodes"] = pv.n_episodes;
    j["seed"] = seed;
    j["gamma"] = ck.train_config.gamma;
    j["eval_epsilon"] = eval_epsilon;
    j["scalarized"] = {{"value", pv.scalarized},
                       {"stderr", pv.scalarized_stderr}};
    j["returns"] = {
        {"sessions", {{"value", pv.sessions_return},
                      {"stderr", pv.sessions_return_stderr}}},
        {"clicks",
         {{"value", pv.clicks_return}, {"stderr", pv.clicks_return_stderr}}},
        {"volume",
         {{"value", pv.volume_return}, {"stderr", pv.volume_return_stderr}}}};
    j["metrics"] = {{"sessions_per_user", pv.sessions_mean},
                    {"sends_per_user", pv.volume_mean},
                    {"active_fraction", pv.active_fraction},
                    {"ctr", pv.ctr_defined ? json(pv.ctr) : json(nullptr)}};
    j["config_digest"] = cfg.digest;
    write_text_file(out_path, j.dump(2) + "\n");
  } else {
    std::string out = csv_join(
        {"n_episodes", "seed", "gamma", "eval_epsilon", "scalarized",
         "scalarized_stderr", "sessions_return", "clicks_return",
         "volume_return", "sessions_per_user", "sends_per_user",
         "active_fraction", "ctr"});
    out += csv_join({std::to_string(pv.n_episodes), std::to_string(seed),
                     format_double(ck.train_config.gamma),
                     format_double(eval_epsilon), format_double(pv.scalarized),
                     format_double(pv.scalarized_stderr),
                     format_double(pv.sessions_return),
                     format_double(pv.clicks_return),
                     format_double(pv.volume_return),
                     format_double(pv.sessions_mean),
                     format_double(pv.volume_mean),
                     format_double(pv.active_fraction),
                     pv.ctr_defined ? format_double(pv.ctr) : ""});
    write_text_file(out_path, out);
  }

  RunManifest m;
  m.command = "eval-sim";
  m.config_digest = cfg.digest;
  m.seed = seed;
  m.inputs = {{config_path, content_digest(read_text_file(config_path))},
              {checkpoint_path,
               content_digest(read_text_file(checkpoint_path))}};
  m.outputs = {{out_path, content_digest(read_text_file(out_path))}};
  write_manifest(m, out_path);
  return pv;
}

struct SweepRow {
  std::size_t cell = 0;
  PreferenceVector preferences;
  double alpha = 0.0;
  double gamma = 0.0;
  double learning_rate = 0.0;
  std::uint64_t seed = 0;
  PolicyMetricEstimates estimates;
  std::string status = "ok";  // cell failures are recorded, not fatal
};

// Grid over preference weights and training hyperparameters; every cell is
// trained `replications` times with seeds seed_base + r (shared across cells
// so replications pair up) and scored with the configured OPE estimator.
// Rows come back cell-major, seed-minor.
inline std::vector<SweepRow> cmd_sweep(const std::string& config_path,
                                       const std::string& dataset_path,
                                       const std::string& out_path,
                                       std::size_t workers = 1,
                                       const std::string& format = "csv") {
  if (format != "json" && format != "csv")
    throw ConfigError("sweep: --format must be 'json' or 'csv'");
  if (workers == 0) throw ConfigError("sweep: --workers must be >= 1");
  PipelineConfig cfg = load_config(config_path);
  Dataset ds = read_dataset(dataset_path);

  RewardSpec base_spec;
  base_spec.use_predicted_clicks = cfg.reward.use_predicted_clicks;
  base_spec.use_predicted_sessions = cfg.reward.use_predicted_sessions;
  if (base_spec.use_predicted_clicks)
    base_spec.click_model = fit_click_model(ds);
  if (base_spec.use_predicted_sessions)
    base_spec.session_model = fit_session_model(ds);

  struct Cell {
    PreferenceVector prefs;
    double alpha, gamma, lr;
  };
  std::vector<Cell> cells;
  for (const PreferenceVector& p : cfg.sweep.preferences)
    for (double a : cfg.sweep.alphas)
      for (double g : cfg.sweep.gammas)
        for (double lr : cfg.sweep.learning_rates)
          cells.push_back({p, a, g, lr});

  std::vector<SweepRow> rows(cells.size() * cfg.sweep.replications);
  // A failing cell (e.g. divergence at an aggressive learning rate) is
  // recorded in its row and the rest of the grid still runs.
  auto run_row = [&](std::size_t row_idx) {
    const Cell& cell = cells[row_idx / cfg.sweep.replications];
    const std::size_t rep = row_idx % cfg.sweep.replications;
    SweepRow& row = rows[row_idx];
    row.cell = row_idx / cfg.sweep.replications;
    row.preferences = cell.prefs;
    row.alpha = cell.alpha;
    row.gamma = cell.gamma;
    row.learning_rate = cell.lr;
    row.seed = cfg.sweep.seed_base + rep;
    try {
      TrainConfig tc = cfg.train;
      tc.alpha = cell.alpha;
      tc.gamma = cell.gamma;
      tc.learning_rate = cell.lr;
      tc.seed = row.seed;
      RewardSpec spec = base_spec;
      spec.preferences = cell.prefs;
      const std::vector<std::vector<double>> rewards =
          build_scalar_rewards(ds, spec);
      auto [policy, report] = train(ds, rewards, tc);
      (void)report;
      row.estimates = evaluate_policy_metrics(
          ds, policy, cfg.ope.smoothing, cell.prefs, cell.gamma,
          cfg.ope.estimator, cfg.ope.self_normalized);
      row.status = "ok";
    } catch (const std::exception& e) {
      std::string msg = e.what();
      for (char& ch : msg)
        if (ch == ',' || ch == '\n') ch = ';';
      row.status = "error: " + msg;
    }
  };

  if (workers <= 1) {
    for (std::size_t i = 0; i < rows.size(); ++i) run_row(i);
  } else {
    // Rows are preallocated and each index is owned by exactly one worker,
    // so no synchronization is needed beyond the joins.
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w]() {
        for (std::size_t i = w; i < rows.size(); i += workers) run_row(i);
      });
    for (std::thread& t : pool) t.join();
  }

  auto row_csv = [&](const SweepRow& r) {
    return csv_join(
        {std::to_string(r.cell), format_double(r.preferences.sessions),
         format_double(r.preferences.clicks), format_double(r.preferences.volume),
         format_double(r.alpha), format_double(r.gamma),
         format_double(r.learning_rate), std::to_string(r.seed),
         to_string(cfg.ope.estimator),
         format_double(r.estimates.sessions.value),
         format_double(r.estimates.sessions.stderr_),
         format_double(r.estimates.clicks.value),
         format_double(r.estimates.clicks.stderr_),
         format_double(r.estimates.volume.value),
         format_double(r.estimates.volume.stderr_),
         format_double(r.estimates.scalarized.value),
         format_double(r.estimates.scalarized.stderr_),
         format_double(r.estimates.scalarized.ess),
         std::to_string(r.estimates.scalarized.n_units), r.status});
  };
  if (format == "csv") {
    std::string out = csv_join(
        {"cell", "w_sessions", "w_clicks", "w_volume", "alpha", "gamma",
         "learning_rate", "seed", "estimator", "sessions_value",
         "sessions_stderr", "clicks_value", "clicks_stderr", "volume_value",
         "volume_stderr", "scalarized_value", "scalarized_stderr", "ess",
         "n_trajectories", "status"});
    for (const SweepRow& r : rows) out += row_csv(r);
    write_text_file(out_path, out);
  } else {
    json arr = json::array();
    for (const SweepRow& r : rows) {
      json j;
      j["cell"] = r.cell;
      j["preferences"] = {{"sessions", r.preferences.sessions},
                          {"clicks", r.preferences.clicks},
                          {"volume", r.preferences.volume}};
      j["alpha"] = r.alpha;
      j["gamma"] = r.gamma;
      j["learning_rate"] = r.learning_rate;
      j["seed"] = r.seed;
      j["estimator"] = to_string(cfg.ope.estimator);
      j["sessions"] = pipedetail::estimate_to_json(r.estimates.sessions);
      j["clicks"] = pipedetail::estimate_to_json(r.estimates.clicks);
      j["volume"] = pipedetail::estimate_to_json(r.estimates.volume);
      j["scalarized"] = pipedetail::estimate_to_json(r.estimates.scalarized);
      j["status"] = r.status;
      arr.push_back(std::move(j));
    }
    write_text_file(out_path, arr.dump(2) + "\n");
  }

  RunManifest m;
  m.command = "sweep";
  m.config_digest = cfg.digest;
  m.seed = cfg.sweep.seed_base;
  m.inputs = {{config_path, content_digest(read_text_file(config_path))},
              {dataset_path, content_digest(read_text_file(dataset_path))}};
  m.outputs = {{out_path, content_digest(read_text_file(out_path))}};
  write_manifest(m, out_path);
  return rows;
}

}  // namespace notirl
