// SPDX-License-Identifier: Apache-2.0
//
// Command-line harness: train one cohort, sweep the divergence order against
// an independent baseline, or emit a two-event divergence curve table.
#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rdml/experiment.hpp"
#include "rdml/text.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  CLI::Option* alpha_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out_dir, "output directory")->required();
  args.alpha_opt = cmd->add_option(
      "--alpha", args.alpha, "override the divergence order everywhere");
  args.seed_opt =
      cmd->add_option("--seed", args.seed, "override the training seed(s)");
}

rdml::ExperimentConfig load(const CommonArgs& args) {
  rdml::Overrides overrides;
  if (args.alpha_opt->count() > 0) {
    overrides.alpha = args.alpha;
  }
  if (args.seed_opt->count() > 0) {
    overrides.seed = args.seed;
  }
  return rdml::load_experiment_config(args.config_path, overrides);
}

int cmd_train(const CommonArgs& args) {
  const rdml::TrainRunResult result = rdml::run_train(load(args), args.out_dir);
  std::cout << (result.independent ? "independent" : "cohort")
            << " run complete; summary in " << args.out_dir << "/summary.tsv\n";
  for (const rdml::StudentSummary& s : result.summaries) {
    std::cout << "student rank " << s.rank << ": mean test acc "
              << rdml::format_fixed(s.mean_test_accuracy, 2) << "%\n";
  }
  return 0;
}

int cmd_sweep(const CommonArgs& args) {
  const rdml::SweepResult result = rdml::run_sweep(load(args), args.out_dir);
  std::cout << "sweep complete; table in " << args.out_dir << "/sweep.tsv\n";
  std::cout << "independent mean acc "
            << rdml::format_fixed(result.independent_mean_accuracy, 2)
            << "%, best alpha " << rdml::format_double(result.best_alpha)
            << " with mean acc "
            << rdml::format_fixed(result.best_alpha_mean_accuracy, 2) << "%\n";
  return 0;
}

int cmd_divcurve(const CommonArgs& args) {
  const auto rows = rdml::run_divcurve(load(args), args.out_dir);
  std::cout << "wrote " << rows.size() << " curve rows to " << args.out_dir
            << "/curve.tsv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cohort training with Renyi-divergence mutual learning"};
  app.require_subcommand(1);

  CommonArgs train_args;
  CommonArgs sweep_args;
  CommonArgs curve_args;
  CLI::App* train_cmd =
      app.add_subcommand("train", "run one cohort training");
  add_common(train_cmd, train_args);
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "sweep the divergence order against an independent baseline");
  add_common(sweep_cmd, sweep_args);
  CLI::App* curve_cmd = app.add_subcommand(
      "divcurve", "emit a two-event divergence curve table");
  add_common(curve_cmd, curve_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) {
      return cmd_train(train_args);
    }
    if (sweep_cmd->parsed()) {
      return cmd_sweep(sweep_args);
    }
    return cmd_divcurve(curve_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
