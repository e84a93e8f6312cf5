// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rdml/config.hpp"
#include "rdml/dataset.hpp"
#include "rdml/divergence.hpp"
#include "rdml/trainer.hpp"

namespace rdml {

struct BlobsSpec {
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t m = 0;
  double spread = 0.0;
  std::uint64_t seed = 0;
};

struct DatasetConfig {
  enum class Source { blobs, file };
  Source source = Source::blobs;
  BlobsSpec blobs;
  std::string path;  // when source == file
};

// Full experiment description, read from one config file. Sections:
// [dataset] (source and its parameters), [model] (hidden layer sizes),
// [train] (every TrainConfig knob, all explicit), [experiment] (alpha grid,
// seed list, report window), [divcurve] (curve settings). Each subcommand
// requires the sections it uses; unknown or missing keys are errors naming
// the field.
struct ExperimentConfig {
  DatasetConfig dataset;
  std::vector<std::size_t> hidden;  // hidden layer sizes; may be empty
  TrainConfig train;
  std::vector<double> alphas;        // sweep grid
  std::vector<std::uint64_t> seeds;  // sweep seeds
  std::size_t report_window = 1;     // E: final epochs averaged in summaries
  CurveSpec curve;
  bool has_dataset = false;
  bool has_model = false;
  bool has_train = false;
  bool has_experiment = false;
  bool has_curve = false;
};

struct Overrides {
  std::optional<double> alpha;       // replaces train.alpha and the grid
  std::optional<std::uint64_t> seed;  // replaces train.seed and the seed list
};

ExperimentConfig load_experiment_config(const std::string& path,
                                        const Overrides& overrides);

Dataset build_dataset(const DatasetConfig& config);

// (input, hidden..., classes) for the configured model on this dataset.
std::vector<std::size_t> cohort_layer_sizes(const ExperimentConfig& config,
                                            const Dataset& data);

// Per-student report numbers over the last `report_window` epochs. Summaries
// are reindexed ascending by mean accuracy (rank 0 = lowest), applied to
// final summaries only, never per epoch.
struct StudentSummary {
  std::size_t rank = 0;
  double mean_test_accuracy = 0.0;  // percent
  double mean_test_loss = 0.0;
  double final_test_loss = 0.0;
};

struct TrainRunResult {
  std::vector<EpochRecord> records;
  std::vector<StudentSummary> summaries;
  bool independent = false;  // cohort_size == 1
};

// One (alpha, seed) training run. Writes epochs.tsv, summary.tsv and
// student_<k>.ckpt into out_dir (created if needed); all writes are atomic
// (temp file + rename) and byte-stable across reruns of the same config.
// Student k's model seed is derived from train.seed and k.
TrainRunResult run_train(const ExperimentConfig& config,
                         const std::string& out_dir);

// One sweep row: a setting ("ind" or "alpha=<value>") and a cohort rank.
struct SweepCell {
  std::string setting;
  std::size_t rank = 0;
  double mean_accuracy = 0.0;  // across seeds, percent
  double std_accuracy = 0.0;   // sample std across seeds (0 for one seed)
  double mean_final_test_loss = 0.0;
  bool best = false;  // flags every row of the best-mean-accuracy alpha
};

// Paired comparison for one (alpha, seed): the cohort's final-epoch test
// loss (mean over students) against the independent baseline trained with
// the same seeds and models.
struct PairedRun {
  double alpha = 0.0;
  std::uint64_t seed = 0;
  double cohort_final_test_loss = 0.0;
  double independent_final_test_loss = 0.0;
  double cohort_mean_accuracy = 0.0;       // last-E mean over students
  double independent_mean_accuracy = 0.0;
};

struct SweepResult {
  std::vector<SweepCell> table;
  std::vector<PairedRun> paired;
  double best_alpha = 0.0;
  double best_alpha_mean_accuracy = 0.0;    // across seeds and students
  double independent_mean_accuracy = 0.0;   // across seeds and students
};

// Runs the independent baseline plus one cohort run per (alpha, seed) with
// paired seeds, then writes sweep.tsv and paired.tsv into out_dir. Per-run
// epoch logs land in out_dir/run_<setting>_seed<seed>_epochs.tsv.
SweepResult run_sweep(const ExperimentConfig& config,
                      const std::string& out_dir);

// Writes the two-event divergence curve table to out_dir/curve.tsv.
std::vector<CurvePoint> run_divcurve(const ExperimentConfig& config,
                                     const std::string& out_dir);

// Shared atomic text-file write (temp file in the same directory + rename).
void write_text_file(const std::string& path, const std::string& content);

}  // namespace rdml
