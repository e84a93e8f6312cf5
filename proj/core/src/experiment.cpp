// SPDX-License-Identifier: Apache-2.0
#include "rdml/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rdml/rng.hpp"
#include "rdml/text.hpp"

namespace rdml {

namespace fs = std::filesystem;

void write_text_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
    if (!file) {
      throw std::runtime_error("write_text_file: cannot open '" + tmp + "'");
    }
    file << content;
    if (!file.flush()) {
      throw std::runtime_error("write_text_file: write failed for '" + tmp +
                               "'");
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("write_text_file: rename failed for '" + path +
                             "'");
  }
}

namespace {

[[noreturn]] void config_fail(const std::string& what) {
  throw std::runtime_error("config: " + what);
}

DatasetConfig parse_dataset_section(const ConfigFile& file) {
  file.require_known_keys(
      "dataset", {"source", "n", "d", "m", "spread", "seed", "path"});
  DatasetConfig out;
  const std::string source = file.get_string("dataset", "source");
  if (source == "blobs") {
    out.source = DatasetConfig::Source::blobs;
    out.blobs.n = file.get_size("dataset", "n");
    out.blobs.d = file.get_size("dataset", "d");
    out.blobs.m = file.get_size("dataset", "m");
    out.blobs.spread = file.get_double("dataset", "spread");
    out.blobs.seed = file.get_uint("dataset", "seed");
  } else if (source == "file") {
    out.source = DatasetConfig::Source::file;
    out.path = file.get_string("dataset", "path");
  } else {
    config_fail("key 'source' in [dataset] must be 'blobs' or 'file'");
  }
  return out;
}

TrainConfig parse_train_section(const ConfigFile& file) {
  file.require_known_keys(
      "train",
      {"cohort_size", "alpha", "psi", "lr0", "momentum", "nesterov",
       "weight_decay", "lr_decay_factor", "lr_decay_epochs", "clip_max_norm",
       "epochs", "batch_size", "seed", "simultaneous_updates",
       "swap_divergence_direction", "epsilon_floor", "kl_switch_tol"});
  TrainConfig train;
  train.cohort_size = file.get_size("train", "cohort_size");
  train.alpha = file.get_double("train", "alpha");
  train.psi = file.get_double("train", "psi");
  train.lr0 = file.get_double("train", "lr0");
  train.momentum = file.get_double("train", "momentum");
  train.nesterov = file.get_bool("train", "nesterov");
  train.weight_decay = file.get_double("train", "weight_decay");
  train.lr_decay_factor = file.get_double("train", "lr_decay_factor");
  train.lr_decay_epochs = file.get_size_list("train", "lr_decay_epochs");
  train.clip_max_norm = file.get_optional_double("train", "clip_max_norm");
  train.epochs = file.get_size("train", "epochs");
  train.batch_size = file.get_size("train", "batch_size");
  train.seed = file.get_uint("train", "seed");
  train.simultaneous_updates = file.get_bool("train", "simultaneous_updates");
  train.swap_divergence_direction =
      file.get_bool("train", "swap_divergence_direction");
  train.epsilon_floor = file.get_double("train", "epsilon_floor");
  train.kl_switch_tol = file.get_double("train", "kl_switch_tol");
  train.validate();
  return train;
}

CurveSpec parse_curve_section(const ConfigFile& file) {
  file.require_known_keys("divcurve", {"fixed", "a", "alphas", "grid_points",
                                       "epsilon_floor", "kl_switch_tol"});
  CurveSpec curve;
  const std::string fixed = file.get_string("divcurve", "fixed");
  if (fixed == "p") {
    curve.fix_p = true;
  } else if (fixed == "q") {
    curve.fix_p = false;
  } else {
    config_fail("key 'fixed' in [divcurve] must be 'p' or 'q'");
  }
  curve.a = file.get_double("divcurve", "a");
  curve.alphas = file.get_double_list("divcurve", "alphas");
  curve.grid_points = file.get_size("divcurve", "grid_points");
  curve.epsilon_floor = file.get_double("divcurve", "epsilon_floor");
  curve.kl_switch_tol = file.get_double("divcurve", "kl_switch_tol");
  curve.validate();
  return curve;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path,
                                        const Overrides& overrides) {
  const ConfigFile file = ConfigFile::parse_file(path);
  ExperimentConfig config;

  if (file.has_section("dataset")) {
    config.dataset = parse_dataset_section(file);
    config.has_dataset = true;
  }
  if (file.has_section("model")) {
    file.require_known_keys("model", {"hidden"});
    config.hidden = file.get_size_list("model", "hidden");
    for (std::size_t size : config.hidden) {
      if (size == 0) {
        config_fail("key 'hidden' in [model] has a zero layer size");
      }
    }
    config.has_model = true;
  }
  if (file.has_section("train")) {
    config.train = parse_train_section(file);
    config.has_train = true;
  }
  if (file.has_section("experiment")) {
    file.require_known_keys("experiment",
                            {"alphas", "seeds", "report_window"});
    config.alphas = file.get_double_list("experiment", "alphas");
    config.seeds = file.get_uint_list("experiment", "seeds");
    config.report_window = file.get_size("experiment", "report_window");
    if (config.alphas.empty()) {
      config_fail("key 'alphas' in [experiment] must not be empty");
    }
    if (config.seeds.empty()) {
      config_fail("key 'seeds' in [experiment] must not be empty");
    }
    if (config.report_window < 1) {
      config_fail("key 'report_window' in [experiment] must be >= 1");
    }
    if (config.has_train && config.report_window > config.train.epochs) {
      config_fail(
          "key 'report_window' in [experiment] must be <= train epochs");
    }
    config.has_experiment = true;
  }
  if (file.has_section("divcurve")) {
    config.curve = parse_curve_section(file);
    config.has_curve = true;
  }

  if (overrides.alpha) {
    if (config.has_train) {
      config.train.alpha = *overrides.alpha;
      config.train.validate();
    }
    if (config.has_experiment) {
      config.alphas = {*overrides.alpha};
    }
    if (config.has_curve) {
      config.curve.alphas = {*overrides.alpha};
      config.curve.validate();
    }
  }
  if (overrides.seed) {
    if (config.has_train) {
      config.train.seed = *overrides.seed;
    }
    if (config.has_experiment) {
      config.seeds = {*overrides.seed};
    }
  }
  return config;
}

Dataset build_dataset(const DatasetConfig& config) {
  if (config.source == DatasetConfig::Source::blobs) {
    return make_blobs(config.blobs.n, config.blobs.d, config.blobs.m,
                      config.blobs.spread, config.blobs.seed);
  }
  return load_delimited(config.path, DelimitedSchema{});
}

std::vector<std::size_t> cohort_layer_sizes(const ExperimentConfig& config,
                                            const Dataset& data) {
  std::vector<std::size_t> sizes;
  sizes.push_back(data.feature_count());
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(data.class_count);
  return sizes;
}

namespace {

void require_sections(const ExperimentConfig& config, bool need_dataset,
                      bool need_model, bool need_train, bool need_experiment,
                      bool need_curve) {
  if (need_dataset && !config.has_dataset) {
    config_fail("missing section [dataset]");
  }
  if (need_model && !config.has_model) {
    config_fail("missing section [model]");
  }
  if (need_train && !config.has_train) {
    config_fail("missing section [train]");
  }
  if (need_experiment && !config.has_experiment) {
    config_fail("missing section [experiment]");
  }
  if (need_curve && !config.has_curve) {
    config_fail("missing section [divcurve]");
  }
}

// One cohort training with explicit per-student model seeds, plus the last-E
// report numbers per (original) student index.
struct CohortRun {
  std::vector<EpochRecord> records;
  std::vector<StudentModel> models;
  std::vector<double> mean_accuracy;
  std::vector<double> mean_test_loss;
  std::vector<double> final_test_loss;
};

CohortRun execute_cohort(const Dataset& data,
                         const std::vector<std::size_t>& sizes,
                         const TrainConfig& config,
                         const std::vector<std::uint64_t>& model_seeds,
                         std::size_t report_window) {
  CohortRun run;
  run.models.reserve(model_seeds.size());
  for (std::uint64_t seed : model_seeds) {
    run.models.push_back(init_student(sizes, seed));
  }
  run.records = train(run.models, data, config);

  const std::size_t cohort = model_seeds.size();
  const std::size_t first_epoch = config.epochs - report_window + 1;
  run.mean_accuracy.assign(cohort, 0.0);
  run.mean_test_loss.assign(cohort, 0.0);
  run.final_test_loss.assign(cohort, 0.0);
  for (const EpochRecord& r : run.records) {
    if (r.epoch >= first_epoch) {
      run.mean_accuracy[r.student] += r.test_accuracy;
      run.mean_test_loss[r.student] += r.test_loss;
    }
    if (r.epoch == config.epochs) {
      run.final_test_loss[r.student] = r.test_loss;
    }
  }
  for (std::size_t k = 0; k < cohort; ++k) {
    run.mean_accuracy[k] /= static_cast<double>(report_window);
    run.mean_test_loss[k] /= static_cast<double>(report_window);
  }
  return run;
}

std::vector<std::uint64_t> derived_model_seeds(std::uint64_t base,
                                               std::size_t cohort) {
  std::vector<std::uint64_t> seeds(cohort);
  for (std::size_t k = 0; k < cohort; ++k) {
    seeds[k] = derive_seed(base, k);
  }
  return seeds;
}

// Summaries reindexed ascending by mean accuracy; stable, so exact ties keep
// cohort order.
std::vector<StudentSummary> ranked_summaries(const CohortRun& run) {
  const std::size_t cohort = run.mean_accuracy.size();
  std::vector<std::size_t> order(cohort);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return run.mean_accuracy[a] < run.mean_accuracy[b];
  });
  std::vector<StudentSummary> out;
  out.reserve(cohort);
  for (std::size_t rank = 0; rank < cohort; ++rank) {
    const std::size_t k = order[rank];
    out.push_back(StudentSummary{rank, run.mean_accuracy[k],
                                 run.mean_test_loss[k],
                                 run.final_test_loss[k]});
  }
  return out;
}

std::string epoch_log_text(const std::vector<EpochRecord>& records) {
  std::ostringstream out;
  write_epoch_log(records, out);
  return out.str();
}

double mean_of(const std::vector<double>& values) {
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

double sample_std(const std::vector<double>& values) {
  if (values.size() < 2) {
    return 0.0;
  }
  const double mean = mean_of(values);
  double acc = 0.0;
  for (double v : values) {
    acc += (v - mean) * (v - mean);
  }
  return std::sqrt(acc / static_cast<double>(values.size() - 1));
}

}  // namespace

TrainRunResult run_train(const ExperimentConfig& config,
                         const std::string& out_dir) {
  require_sections(config, true, true, true, true, false);
  const Dataset data = build_dataset(config.dataset);
  const std::vector<std::size_t> sizes = cohort_layer_sizes(config, data);
  if (config.report_window > config.train.epochs) {
    config_fail("report_window must be <= train epochs");
  }

  const CohortRun run = execute_cohort(
      data, sizes, config.train,
      derived_model_seeds(config.train.seed, config.train.cohort_size),
      config.report_window);

  TrainRunResult result;
  result.records = run.records;
  result.summaries = ranked_summaries(run);
  result.independent = config.train.cohort_size == 1;

  fs::create_directories(out_dir);
  write_text_file(out_dir + "/epochs.tsv", epoch_log_text(run.records));

  std::ostringstream summary;
  summary << "mode\tstudent\tmean_test_acc\tmean_test_loss\tfinal_test_loss\n";
  const std::string mode = result.independent ? "independent" : "cohort";
  for (const StudentSummary& s : result.summaries) {
    summary << mode << '\t' << s.rank << '\t'
            << format_fixed(s.mean_test_accuracy, 2) << '\t'
            << format_double(s.mean_test_loss) << '\t'
            << format_double(s.final_test_loss) << '\n';
  }
  write_text_file(out_dir + "/summary.tsv", summary.str());

  for (std::size_t k = 0; k < run.models.size(); ++k) {
    save_checkpoint(run.models[k],
                    out_dir + "/student_" + std::to_string(k) + ".ckpt");
  }
  return result;
}

SweepResult run_sweep(const ExperimentConfig& config,
                      const std::string& out_dir) {
  require_sections(config, true, true, true, true, false);
  const Dataset data = build_dataset(config.dataset);
  const std::vector<std::size_t> sizes = cohort_layer_sizes(config, data);
  const std::size_t cohort = config.train.cohort_size;
  const std::size_t n_seeds = config.seeds.size();
  fs::create_directories(out_dir);

  struct RunStats {
    std::vector<double> acc_by_rank;  // last-E accuracy, ascending
    double final_loss = 0.0;          // final-epoch test loss, student mean
  };

  // Independent baseline: the same students, trained alone with the same
  // shuffle seed, so every comparison is seed- and init-paired.
  std::vector<RunStats> ind_runs(n_seeds);
  for (std::size_t si = 0; si < n_seeds; ++si) {
    const std::uint64_t seed = config.seeds[si];
    std::vector<EpochRecord> merged;
    RunStats stats;
    std::vector<double> final_losses;
    for (std::size_t k = 0; k < cohort; ++k) {
      TrainConfig single = config.train;
      single.cohort_size = 1;
      single.seed = seed;
      const CohortRun run = execute_cohort(
          data, sizes, single, {derive_seed(seed, k)}, config.report_window);
      for (EpochRecord r : run.records) {
        r.student = k;
        merged.push_back(r);
      }
      stats.acc_by_rank.push_back(run.mean_accuracy[0]);
      final_losses.push_back(run.final_test_loss[0]);
    }
    std::sort(stats.acc_by_rank.begin(), stats.acc_by_rank.end());
    stats.final_loss = mean_of(final_losses);
    // Group the merged log by epoch so it reads like a cohort log.
    std::stable_sort(merged.begin(), merged.end(),
                     [](const EpochRecord& a, const EpochRecord& b) {
                       return a.epoch < b.epoch;
                     });
    write_text_file(
        out_dir + "/run_ind_seed" + std::to_string(seed) + "_epochs.tsv",
        epoch_log_text(merged));
    ind_runs[si] = std::move(stats);
  }

  std::vector<std::vector<RunStats>> alpha_runs(config.alphas.size());
  for (std::size_t ai = 0; ai < config.alphas.size(); ++ai) {
    for (std::size_t si = 0; si < n_seeds; ++si) {
      const std::uint64_t seed = config.seeds[si];
      TrainConfig cohort_config = config.train;
      cohort_config.alpha = config.alphas[ai];
      cohort_config.seed = seed;
      const CohortRun run =
          execute_cohort(data, sizes, cohort_config,
                         derived_model_seeds(seed, cohort), config.report_window);
      RunStats stats;
      stats.acc_by_rank = run.mean_accuracy;
      std::sort(stats.acc_by_rank.begin(), stats.acc_by_rank.end());
      stats.final_loss = mean_of(run.final_test_loss);
      write_text_file(out_dir + "/run_alpha" +
                          format_double(config.alphas[ai]) + "_seed" +
                          std::to_string(seed) + "_epochs.tsv",
                      epoch_log_text(run.records));
      alpha_runs[ai].push_back(std::move(stats));
    }
  }

  SweepResult result;
  auto add_rows = [&](const std::string& setting,
                      const std::vector<RunStats>& runs) {
    double overall = 0.0;
    for (std::size_t rank = 0; rank < cohort; ++rank) {
      std::vector<double> accs;
      std::vector<double> losses;
      for (const RunStats& run : runs) {
        accs.push_back(run.acc_by_rank[rank]);
        losses.push_back(run.final_loss);
      }
      SweepCell cell;
      cell.setting = setting;
      cell.rank = rank;
      cell.mean_accuracy = mean_of(accs);
      cell.std_accuracy = sample_std(accs);
      cell.mean_final_test_loss = mean_of(losses);
      overall += cell.mean_accuracy;
      result.table.push_back(std::move(cell));
    }
    return overall / static_cast<double>(cohort);
  };

  result.independent_mean_accuracy = add_rows("ind", ind_runs);
  std::size_t best_ai = 0;
  std::vector<double> alpha_means(config.alphas.size());
  for (std::size_t ai = 0; ai < config.alphas.size(); ++ai) {
    alpha_means[ai] = add_rows("alpha=" + format_double(config.alphas[ai]),
                               alpha_runs[ai]);
    if (alpha_means[ai] > alpha_means[best_ai]) {
      best_ai = ai;
    }
  }
  result.best_alpha = config.alphas[best_ai];
  result.best_alpha_mean_accuracy = alpha_means[best_ai];
  const std::string best_setting =
      "alpha=" + format_double(config.alphas[best_ai]);
  for (SweepCell& cell : result.table) {
    cell.best = cell.setting == best_setting;
  }

  for (std::size_t ai = 0; ai < config.alphas.size(); ++ai) {
    for (std::size_t si = 0; si < n_seeds; ++si) {
      PairedRun paired;
      paired.alpha = config.alphas[ai];
      paired.seed = config.seeds[si];
      paired.cohort_final_test_loss = alpha_runs[ai][si].final_loss;
      paired.independent_final_test_loss = ind_runs[si].final_loss;
      paired.cohort_mean_accuracy = mean_of(alpha_runs[ai][si].acc_by_rank);
      paired.independent_mean_accuracy = mean_of(ind_runs[si].acc_by_rank);
      result.paired.push_back(paired);
    }
  }

  std::ostringstream sweep;
  sweep << "setting\tstudent\tmean_acc\tstd_acc\tmean_final_test_loss\tbest\n";
  for (const SweepCell& cell : result.table) {
    sweep << cell.setting << '\t' << cell.rank << '\t'
          << format_fixed(cell.mean_accuracy, 2) << '\t'
          << format_fixed(cell.std_accuracy, 2) << '\t'
          << format_double(cell.mean_final_test_loss) << '\t'
          << (cell.best ? 1 : 0) << '\n';
  }
  write_text_file(out_dir + "/sweep.tsv", sweep.str());

  std::ostringstream paired_out;
  paired_out << "alpha\tseed\tcohort_final_test_loss\t"
                "independent_final_test_loss\tcohort_mean_acc\t"
                "independent_mean_acc\n";
  for (const PairedRun& p : result.paired) {
    paired_out << format_double(p.alpha) << '\t' << p.seed << '\t'
               << format_double(p.cohort_final_test_loss) << '\t'
               << format_double(p.independent_final_test_loss) << '\t'
               << format_double(p.cohort_mean_accuracy) << '\t'
               << format_double(p.independent_mean_accuracy) << '\n';
  }
  write_text_file(out_dir + "/paired.tsv", paired_out.str());
  return result;
}

std::vector<CurvePoint> run_divcurve(const ExperimentConfig& config,
                                     const std::string& out_dir) {
  require_sections(config, false, false, false, false, true);
  const std::vector<CurvePoint> rows = divergence_curve(config.curve);
  fs::create_directories(out_dir);
  std::ostringstream out;
  write_curve(rows, out);
  write_text_file(out_dir + "/curve.tsv", out.str());
  return rows;
}

}  // namespace rdml
