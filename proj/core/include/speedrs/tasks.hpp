#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "speedrs/approximator.hpp"
#include "speedrs/config.hpp"
#include "speedrs/neural.hpp"
#include "speedrs/reference.hpp"

namespace speedrs {

enum class Task { Pricing, MixtureEstimation, GasTemperature };
const char* to_string(Task t) noexcept;
Task task_from_string(const std::string& name);

/// Distance corpus and approximator training settings.
struct ApproximatorExperiment {
  CorpusConfig corpus;
  std::vector<std::size_t> levels{2, 3};  // truncation levels trained
  std::size_t n_seeds = 3;
  TrainConfig train;
  std::size_t diag_tests = 300;
  std::size_t heldout_pairs = 0;  // fresh oracle pairs for the rank check
  bool ablation = true;           // also train without zero rows

  static ApproximatorExperiment from_config(const Config& c);
  Config to_config() const;
};

struct ExperimentConfig {
  Task task = Task::Pricing;
  std::uint64_t seed = 0;
  std::size_t n_seeds = 3;
  std::size_t dataset_size = 2000;
  std::size_t batch = 400;           // SPEEDRS paths (gas: particles) per process
  std::size_t baseline_batch = 100;  // leading paths seen by pointwise baselines
  std::size_t ref_batch = 400;       // paths behind each reference signature
  std::size_t path_length = 15;
  double horizon = 1.0;
  std::vector<std::size_t> b_ladder{5, 10, 20};
  std::vector<std::size_t> widths{15, 30, 50};
  std::size_t approx_level = 3;
  TrainConfig train;        // SPEEDRS regressors
  double baseline_lr = 5e-4;
  Activation activation = Activation::Relu;
  BaselineForm baseline_form = BaselineForm::AsPrinted;
  double baseline_sigma = 1.0;
  double x0 = 90.0, strike = 80.0, barrier = 85.0;
  std::size_t mc_paths = 100000;
  std::size_t interior_alphas = 5;  // estimation rows per pair besides alpha = 0, 1
  double gas_volume = 400.0;
  std::size_t oos_points = 21;
  std::size_t oos_runs = 10;
  double keep_prob = 0.6;
  bool paper_scale = false;
  bool save_bundles = false;

  /// Desk-scale defaults per task, or the paper-scale profile.
  static ExperimentConfig defaults(Task task, bool paper_scale = false);
  /// defaults(task, paper_scale) overridden by every key present in c.
  static ExperimentConfig from_config(const Config& c);
  Config to_config() const;
  void validate() const;

  SimGrid grid() const { return {horizon, path_length - 1}; }
  std::size_t dim() const { return task == Task::GasTemperature ? 3 : 1; }
  ReferenceConfig reference_config() const;
  std::size_t b_max() const { return b_ladder.back(); }
};

/// One labelled process of a task dataset.
struct TaskRow {
  ModelSpec spec;
  double target = 0.0;
  double target_se = 0.0;  // Monte Carlo standard error of the label
  std::uint64_t bundle_seed = 0;
};

/// Specs and targets. Pricing labels are Monte Carlo barrier prices.
std::vector<TaskRow> task_rows(const ExperimentConfig& cfg);
PathBundle task_bundle(const ExperimentConfig& cfg, const TaskRow& row);

struct TaskDataset {
  std::vector<TaskRow> rows;
  std::vector<ReferenceSet> refs;          // ladder steps back to back
  std::vector<std::size_t> ladder_offsets;  // first column of each step
  FeatureTable speedrs, rbf, matern32;      // baselines see the last step's refs
  std::span<const ReferenceSet> ladder_refs(std::size_t step) const;
};

/// Reference sets for every ladder step; step i uses derive_seed(seed, {100, i}).
std::vector<ReferenceSet> task_reference_sets(const ExperimentConfig& cfg, std::vector<std::size_t>* offsets);

TaskDataset gen_task_dataset(const ExperimentConfig& cfg, const MmdApproximator& approx);

struct RunMetric {
  std::string model;  // speedrs | rbf | matern32
  std::size_t b = 0, width = 0, seed_index = 0;
  double train_mse = 0.0, valid_mse = 0.0;
};

struct ExperimentResult {
  std::vector<RunMetric> runs;
  std::vector<Regressor> seed0_models;  // parallel to the first len(models) runs
  std::vector<std::string> seed0_names;
};

/// Trains every ladder step and both baselines at the largest B over n_seeds
/// seeds. Independent runs execute in parallel.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const FeatureTable& speedrs,
                                std::span<const std::size_t> ladder_offsets, const FeatureTable& rbf,
                                const FeatureTable& matern32);

struct Table2Row {
  std::string task, model;
  std::size_t b = 0, width = 0;
  double train_mse = 0.0, train_sd = 0.0, valid_mse = 0.0, valid_sd = 0.0;
};
/// Mean and sample SD over seeds per (model, B, width), rows in first-seen order.
std::vector<Table2Row> aggregate_runs(Task task, std::span<const RunMetric> runs);

struct OosRow {
  std::string sweep, sampling;
  double x = 0.0;
  std::string model;
  std::optional<double> prediction;  // empty when the featurizer rejects the input
  double target = 0.0;
  std::string status;
};

struct OosModels {
  const MmdApproximator* approx = nullptr;
  std::span<const ReferenceSet> refs;  // the largest ladder step
  const Regressor* speedrs = nullptr;
  const Regressor* rbf = nullptr;
  const Regressor* matern32 = nullptr;
};

/// Out-of-regime and irregular-sampling sweeps. Each prediction is the mean
/// over oos_runs fresh bundles. Throws InvalidConfig for the gas task.
std::vector<OosRow> oos_test(const ExperimentConfig& cfg, const OosModels& m);

// CSV emitters; headers are fixed.
void write_runs_csv(const std::string& file, Task task, std::span<const RunMetric> runs);
std::vector<RunMetric> read_runs_csv(const std::string& file);
void write_table2_csv(const std::string& file, std::span<const Table2Row> rows);
void write_oos_csv(const std::string& file, std::span<const OosRow> rows);

/// Runs one CLI verb inside `workdir`. `c` holds every setting; the verb
/// writes its outputs and a manifest under workdir/manifests. Returns the
/// relative paths written.
std::vector<std::string> run_verb(const std::string& verb, const Config& c, const std::string& workdir);

/// Verbs understood by run_verb.
const std::vector<std::string>& verb_names();

/// Loads the config stored in a manifest written by run_verb.
Config config_from_manifest(const std::string& file, std::string* verb);

}  // namespace speedrs
