// Command-line front end: gen-data, fit-rewards, train, evaluate, sweep,
// eval-sim. Exit codes: 0 success, 1 usage/config errors, 2 data/schema
// errors, 3 numerical failures.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "notirl/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string dataset;
  std::string checkpoint;
  std::string models;
  std::string out;
  std::string format = "json";
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t workers = 1;
  std::size_t episodes = 500;
  double eval_epsilon = 0.0;
};

std::optional<std::uint64_t> seed_override(const CommonArgs& a) {
  if (a.seed_set) return a.seed;
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline RL toolkit for notification send decisions"};
  app.require_subcommand(1);
  CommonArgs a;

  CLI::App* gen = app.add_subcommand(
      "gen-data", "Simulate logged decisions under the baseline policy");
  gen->add_option("--config", a.config, "Run config JSON")->required();
  gen->add_option("--out", a.out, "Output dataset path")->required();
  gen->add_option("--seed", a.seed, "Override sim.seed")
      ->each([&](const std::string&) { a.seed_set = true; });

  CLI::App* fit = app.add_subcommand(
      "fit-rewards", "Fit click and session models on a dataset");
  fit->add_option("--config", a.config, "Run config JSON")->required();
  fit->add_option("--dataset", a.dataset, "Input dataset")->required();
  fit->add_option("--out", a.out, "Output model bundle path")->required();

  CLI::App* tr = app.add_subcommand(
      "train", "Train a conservative Q policy on logged data");
  tr->add_option("--config", a.config, "Run config JSON")->required();
  tr->add_option("--dataset", a.dataset, "Input dataset")->required();
  tr->add_option("--models", a.models,
                 "Fitted reward models (needed for predicted rewards)");
  tr->add_option("--out", a.out, "Output checkpoint path")->required();
  tr->add_option("--seed", a.seed, "Override train.seed")
      ->each([&](const std::string&) { a.seed_set = true; });
  tr->add_option("--format", a.format, "Training report format: json|csv");

  CLI::App* ev = app.add_subcommand(
      "evaluate", "Off-policy estimates for a checkpoint on logged data");
  ev->add_option("--config", a.config, "Run config JSON")->required();
  ev->add_option("--dataset", a.dataset, "Input dataset")->required();
  ev->add_option("--checkpoint", a.checkpoint, "Trained checkpoint")
      ->required();
  ev->add_option("--out", a.out, "Output report path")->required();
  ev->add_option("--format", a.format, "Report format: json|csv");

  CLI::App* sw = app.add_subcommand(
      "sweep", "Grid over preferences and hyperparameters with OPE scoring");
  sw->add_option("--config", a.config, "Run config JSON")->required();
  sw->add_option("--dataset", a.dataset, "Input dataset")->required();
  sw->add_option("--out", a.out, "Output table path")->required();
  sw->add_option("--workers", a.workers, "Parallel training workers");
  // Sweeps default to the tabular format.
  std::string sweep_format = "csv";
  sw->add_option("--format", sweep_format, "Table format: csv|json");

  CLI::App* es = app.add_subcommand(
      "eval-sim", "Ground-truth policy value from the simulator");
  es->add_option("--config", a.config, "Run config JSON")->required();
  es->add_option("--checkpoint", a.checkpoint, "Trained checkpoint")
      ->required();
  es->add_option("--out", a.out, "Output report path")->required();
  es->add_option("--episodes", a.episodes, "Monte Carlo episodes");
  es->add_option("--seed", a.seed, "Override the evaluation seed")
      ->each([&](const std::string&) { a.seed_set = true; });
  es->add_option("--eval-epsilon", a.eval_epsilon,
                 "Evaluate the epsilon-smoothed policy instead of greedy");
  es->add_option("--format", a.format, "Report format: json|csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (gen->parsed()) {
      const notirl::GenDataSummary s =
          notirl::cmd_gen_data(a.config, a.out, seed_override(a));
      std::cout << "wrote " << a.out << " (" << s.n_trajectories
                << " episodes, " << s.n_transitions << " transitions)\n";
    } else if (fit->parsed()) {
      const notirl::RewardModelBundle b =
          notirl::cmd_fit_reward_models(a.config, a.dataset, a.out);
      std::cout << "wrote " << a.out << " (click rows " << b.click_diag.n_rows
                << ", final loss " << b.click_diag.final_loss << ")\n";
    } else if (tr->parsed()) {
      const notirl::TrainSummary s = notirl::cmd_train(
          a.config, a.dataset, a.models, a.out, seed_override(a), a.format);
      std::cout << "wrote " << s.checkpoint_path << " (" << s.n_steps
                << " steps, final loss " << s.final_total_loss << ")\n";
    } else if (ev->parsed()) {
      const notirl::PolicyMetricEstimates est = notirl::cmd_evaluate(
          a.config, a.dataset, a.checkpoint, a.out, a.format);
      std::cout << "wrote " << a.out << " (scalarized "
                << est.scalarized.value << " +/- " << est.scalarized.stderr_
                << ")\n";
    } else if (sw->parsed()) {
      const auto rows =
          notirl::cmd_sweep(a.config, a.dataset, a.out, a.workers, sweep_format);
      std::cout << "wrote " << a.out << " (" << rows.size() << " rows)\n";
    } else if (es->parsed()) {
      const notirl::PolicyValue pv = notirl::cmd_eval_sim(
          a.config, a.checkpoint, a.out, a.episodes, seed_override(a),
          a.eval_epsilon, a.format);
      std::cout << "wrote " << a.out << " (scalarized " << pv.scalarized
                << " +/- " << pv.scalarized_stderr << ")\n";
    }
  } catch (const notirl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const notirl::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const notirl::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
