#include "speedrs/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <numeric>
#include <sstream>

#include "speedrs/bundle_io.hpp"
#include "speedrs/csv.hpp"
#include "speedrs/error.hpp"
#include "speedrs/mmd.hpp"
#include "speedrs/parallel.hpp"
#include "speedrs/rng.hpp"
#include "speedrs/stats.hpp"

namespace speedrs {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

// Seed streams under the experiment seed.
constexpr std::uint64_t kSpecStream = 10, kLabelStream = 11, kBundleStream = 12, kRefStream = 100,
                        kTrainStream = 200, kOosStream = 300;
// Seed streams under the corpus seed.
constexpr std::uint64_t kHeldoutStream = 400, kApproxTrainStream = 500, kDiagStream = 600;

constexpr double kPricingAlphas[] = {0.0, 0.25, 0.5, 0.75, 1.0};

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

std::ofstream open_out(const std::string& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write " + file);
  out.precision(17);
  return out;
}

std::string read_file(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot read " + file);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void close_checked(std::ofstream& out, const std::string& file) {
  out.close();
  if (!out) fail(Errc::Io, "failed writing " + file);
}

std::string oos_sampling_name(bool irregular) { return irregular ? "irregular" : "regular"; }

}  // namespace

const char* to_string(Task t) noexcept {
  switch (t) {
    case Task::Pricing: return "pricing";
    case Task::MixtureEstimation: return "mixture_estimation";
    case Task::GasTemperature: return "gas_temperature";
  }
  return "unknown";
}

Task task_from_string(const std::string& name) {
  for (auto t : {Task::Pricing, Task::MixtureEstimation, Task::GasTemperature})
    if (name == to_string(t)) return t;
  fail(Errc::InvalidConfig, "unknown task '" + name + "'");
}

// ---------------------------------------------------------------------------
// Configuration

ApproximatorExperiment ApproximatorExperiment::from_config(const Config& c) {
  ApproximatorExperiment a;
  const bool paper = c.get_bool("paper_scale", false);
  auto& k = a.corpus;
  k.seed = c.get_u64("seed", 0);
  // Full scale: 39,449 rows of which 10,000 are zero rows.
  k.n_rows = c.get_size("corpus.rows", paper ? 39449 : 3000);
  k.zero_fraction = c.get_double("corpus.zero_fraction", paper ? 10000.0 / 39449.0 : 0.25);
  k.batch = c.get_size("corpus.batch", paper ? 400 : 100);
  k.grid.n_steps = c.get_size("corpus.length", 15) - 1;
  k.grid.horizon = c.get_double("corpus.horizon", 1.0);
  k.level = c.get_size("corpus.level", 4);
  k.oracle.kernel = StaticKernel::rbf(c.get_double("oracle.sigma", 0.5));
  k.oracle.outer_kernel = StaticKernel::rbf(c.get_double("oracle.outer_sigma", 2.0));
  k.oracle.lambda = c.get_double("oracle.lambda", 1e-3);
  k.oracle.inner.dyadic_order = static_cast<unsigned>(c.get_size("oracle.dyadic_order", 1));
  k.oracle.outer.dyadic_order = k.oracle.inner.dyadic_order;
  k.oracle.window_stride = c.get_size("oracle.window_stride", 1);
  a.levels = c.get_size_list("approx.levels", {2, 3});
  a.n_seeds = c.get_size("approx.n_seeds", paper ? 5 : 3);
  a.train.epochs = c.get_size("approx.epochs", 200);
  a.train.batch_size = c.get_size("approx.batch_size", 64);
  a.train.initial_lr = c.get_double("approx.lr", 5e-4);
  a.train.final_lr_ratio = c.get_double("approx.final_lr_ratio", 0.1);
  a.train.weight_decay = c.get_double("approx.weight_decay", 1e-4);
  a.diag_tests = c.get_size("approx.diag_tests", 300);
  a.heldout_pairs = c.get_size("approx.heldout_pairs", 0);
  a.ablation = c.get_bool("approx.ablation", true);
  k.validate();
  a.train.validate();
  if (a.levels.empty() || a.n_seeds == 0) fail(Errc::InvalidConfig, "approx.levels and approx.n_seeds must be non-empty");
  for (auto l : a.levels)
    if (l < 1 || l > k.level) fail(Errc::InvalidConfig, "approx.levels must lie in [1, corpus.level]");
  if (k.grid.n_steps < 1) fail(Errc::InvalidConfig, "corpus.length must be >= 2");
  return a;
}

Config ApproximatorExperiment::to_config() const {
  Config c;
  const auto& k = corpus;
  c.set("seed", std::to_string(k.seed));
  c.set("corpus.rows", std::to_string(k.n_rows));
  c.set("corpus.zero_fraction", format_double(k.zero_fraction));
  c.set("corpus.batch", std::to_string(k.batch));
  c.set("corpus.length", std::to_string(k.grid.n_steps + 1));
  c.set("corpus.horizon", format_double(k.grid.horizon));
  c.set("corpus.level", std::to_string(k.level));
  c.set("oracle.sigma", format_double(k.oracle.kernel.sigma));
  c.set("oracle.outer_sigma", format_double(k.oracle.outer_kernel.sigma));
  c.set("oracle.lambda", format_double(k.oracle.lambda));
  c.set("oracle.dyadic_order", std::to_string(k.oracle.inner.dyadic_order));
  c.set("oracle.window_stride", std::to_string(k.oracle.window_stride));
  c.set("approx.levels", join_sizes(levels));
  c.set("approx.n_seeds", std::to_string(n_seeds));
  c.set("approx.epochs", std::to_string(train.epochs));
  c.set("approx.batch_size", std::to_string(train.batch_size));
  c.set("approx.lr", format_double(train.initial_lr));
  c.set("approx.final_lr_ratio", format_double(train.final_lr_ratio));
  c.set("approx.weight_decay", format_double(train.weight_decay));
  c.set("approx.diag_tests", std::to_string(diag_tests));
  c.set("approx.heldout_pairs", std::to_string(heldout_pairs));
  c.set("approx.ablation", ablation ? "true" : "false");
  return c;
}

ExperimentConfig ExperimentConfig::defaults(Task task, bool paper_scale) {
  ExperimentConfig e;
  e.task = task;
  e.paper_scale = paper_scale;
  if (paper_scale) {
    e.n_seeds = 5;
    e.batch = 2000;
    e.baseline_batch = 400;
    e.ref_batch = 2000;
    e.oos_runs = 100;
  }
  switch (task) {
    case Task::Pricing:
      e.dataset_size = paper_scale ? 10000 : 2000;
      e.x0 = 90.0;
      break;
    case Task::MixtureEstimation:
      e.dataset_size = paper_scale ? 14000 : 2800;
      e.x0 = 1.0;
      break;
    case Task::GasTemperature:
      e.dataset_size = paper_scale ? 5000 : 1000;
      e.batch = paper_scale ? 800 : 400;
      e.gas_volume = static_cast<double>(e.batch);
      e.path_length = 20;
      e.b_ladder = {9, 15, 30};
      e.widths = {50, 75, 100};
      e.activation = Activation::Tanhshrink;
      e.train.initial_lr = 1e-2;
      break;
  }
  return e;
}

ExperimentConfig ExperimentConfig::from_config(const Config& c) {
  const Task task = task_from_string(c.get_string("task", "pricing"));
  ExperimentConfig e = defaults(task, c.get_bool("paper_scale", false));
  e.seed = c.get_u64("seed", e.seed);
  e.n_seeds = c.get_size("n_seeds", e.n_seeds);
  e.dataset_size = c.get_size("dataset_size", e.dataset_size);
  e.batch = c.get_size("batch", e.batch);
  e.baseline_batch = c.get_size("baseline_batch", e.baseline_batch);
  e.ref_batch = c.get_size("ref_batch", e.ref_batch);
  e.path_length = c.get_size("path_length", e.path_length);
  e.horizon = c.get_double("horizon", e.horizon);
  e.b_ladder = c.get_size_list("b_ladder", e.b_ladder);
  e.widths = c.get_size_list("widths", e.widths);
  e.approx_level = c.get_size("approx_level", e.approx_level);
  e.train.epochs = c.get_size("epochs", e.train.epochs);
  e.train.batch_size = c.get_size("batch_size", e.train.batch_size);
  e.train.initial_lr = c.get_double("lr", e.train.initial_lr);
  e.train.final_lr_ratio = c.get_double("final_lr_ratio", e.train.final_lr_ratio);
  e.train.weight_decay = c.get_double("weight_decay", e.train.weight_decay);
  e.baseline_lr = c.get_double("baseline_lr", e.baseline_lr);
  e.baseline_sigma = c.get_double("baseline_sigma", e.baseline_sigma);
  if (c.has("activation")) e.activation = activation_from_string(c.get_string("activation", ""));
  if (c.has("baseline_form")) e.baseline_form = baseline_form_from_string(c.get_string("baseline_form", ""));
  e.x0 = c.get_double("x0", e.x0);
  e.strike = c.get_double("strike", e.strike);
  e.barrier = c.get_double("barrier", e.barrier);
  e.mc_paths = c.get_size("mc_paths", e.mc_paths);
  e.interior_alphas = c.get_size("interior_alphas", e.interior_alphas);
  e.gas_volume = c.get_double("gas_volume", e.gas_volume);
  e.oos_points = c.get_size("oos_points", e.oos_points);
  e.oos_runs = c.get_size("oos_runs", e.oos_runs);
  e.keep_prob = c.get_double("keep_prob", e.keep_prob);
  e.save_bundles = c.get_bool("save_bundles", e.save_bundles);
  e.validate();
  return e;
}

Config ExperimentConfig::to_config() const {
  Config c;
  c.set("task", to_string(task));
  c.set("paper_scale", paper_scale ? "true" : "false");
  c.set("seed", std::to_string(seed));
  c.set("n_seeds", std::to_string(n_seeds));
  c.set("dataset_size", std::to_string(dataset_size));
  c.set("batch", std::to_string(batch));
  c.set("baseline_batch", std::to_string(baseline_batch));
  c.set("ref_batch", std::to_string(ref_batch));
  c.set("path_length", std::to_string(path_length));
  c.set("horizon", format_double(horizon));
  c.set("b_ladder", join_sizes(b_ladder));
  c.set("widths", join_sizes(widths));
  c.set("approx_level", std::to_string(approx_level));
  c.set("epochs", std::to_string(train.epochs));
  c.set("batch_size", std::to_string(train.batch_size));
  c.set("lr", format_double(train.initial_lr));
  c.set("final_lr_ratio", format_double(train.final_lr_ratio));
  c.set("weight_decay", format_double(train.weight_decay));
  c.set("baseline_lr", format_double(baseline_lr));
  c.set("baseline_sigma", format_double(baseline_sigma));
  c.set("activation", to_string(activation));
  c.set("baseline_form", to_string(baseline_form));
  c.set("x0", format_double(x0));
  c.set("strike", format_double(strike));
  c.set("barrier", format_double(barrier));
  c.set("mc_paths", std::to_string(mc_paths));
  c.set("interior_alphas", std::to_string(interior_alphas));
  c.set("gas_volume", format_double(gas_volume));
  c.set("oos_points", std::to_string(oos_points));
  c.set("oos_runs", std::to_string(oos_runs));
  c.set("keep_prob", format_double(keep_prob));
  c.set("save_bundles", save_bundles ? "true" : "false");
  return c;
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) fail(Errc::InvalidConfig, what);
  };
  require(n_seeds >= 1 && dataset_size >= 10, "n_seeds >= 1 and dataset_size >= 10 required");
  require(batch >= 2 && batch % 2 == 0, "batch must be even and >= 2");
  require(baseline_batch >= 1 && baseline_batch <= batch, "baseline_batch must lie in [1, batch]");
  require(ref_batch >= 2 && ref_batch % 2 == 0 && ref_batch >= baseline_batch,
          "ref_batch must be even and at least baseline_batch");
  require(path_length >= 2 && horizon > 0.0, "path_length >= 2 and horizon > 0 required");
  require(!b_ladder.empty() && b_ladder.size() == widths.size(), "b_ladder and widths must have equal, non-zero length");
  require(std::is_sorted(b_ladder.begin(), b_ladder.end()), "b_ladder must be increasing");
  for (std::size_t i = 0; i < b_ladder.size(); ++i) {
    require(b_ladder[i] >= 1 && widths[i] >= 1, "ladder entries and widths must be positive");
    if (b_ladder[i] % dim() != 0)
      fail(Errc::IndivisibleCount, "B = " + std::to_string(b_ladder[i]) + " is not divisible by the dimension");
  }
  require(approx_level >= 1, "approx_level must be >= 1");
  require(baseline_lr > 0.0 && baseline_sigma > 0.0, "baseline_lr and baseline_sigma must be positive");
  require(keep_prob > 0.0 && keep_prob <= 1.0, "keep_prob must lie in (0, 1]");
  require(oos_points >= 1 && oos_runs >= 1, "oos_points and oos_runs must be positive");
  train.validate();
  switch (task) {
    case Task::Pricing:
      require(dataset_size % std::size(kPricingAlphas) == 0, "pricing dataset_size must be a multiple of 5");
      require(mc_paths >= 2 && mc_paths % 2 == 0, "mc_paths must be even and >= 2");
      require(x0 > 0.0, "x0 must be positive");
      break;
    case Task::MixtureEstimation:
      require(dataset_size % (interior_alphas + 2) == 0, "estimation dataset_size must be a multiple of interior_alphas + 2");
      require(x0 > 0.0, "x0 must be positive");
      break;
    case Task::GasTemperature:
      require(gas_volume > 0.0, "gas_volume must be positive");
      break;
  }
}

ReferenceConfig ExperimentConfig::reference_config() const {
  ReferenceConfig r;
  r.level = approx_level;
  r.sig_batch = ref_batch;
  r.baseline_batch = baseline_batch;
  r.grid = grid();
  // Gas references start mid-box so their raw values share the positions' scale.
  r.defaults.x0 = task == Task::GasTemperature ? 0.5 * std::cbrt(gas_volume) : x0;
  return r;
}

// ---------------------------------------------------------------------------
// Datasets

std::vector<TaskRow> task_rows(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<TaskRow> rows(cfg.dataset_size);
  const SamplingDefaults sd{cfg.x0, cfg.batch, cfg.gas_volume};
  switch (cfg.task) {
    case Task::Pricing: {
      const std::size_t per = std::size(kPricingAlphas), pairs = cfg.dataset_size / per;
      parallel_for(pairs, [&](std::size_t p) {
        Rng rng(derive_seed(cfg.seed, {kSpecStream, p}));
        const ModelSpec left = sample_params(ModelKind::MeanReverting, rng, sd);
        const ModelSpec right = sample_params(ModelKind::RBergomi, rng, sd);
        const auto prices = price_barrier_mixtures(kPricingAlphas, left, right, cfg.grid(), cfg.mc_paths,
                                                   derive_seed(cfg.seed, {kLabelStream, p}), cfg.strike, cfg.barrier);
        for (std::size_t a = 0; a < per; ++a) {
          auto& r = rows[p * per + a];
          r.spec = make_mixture(kPricingAlphas[a], left, right);
          r.target = prices[a].price;
          r.target_se = prices[a].std_error;
        }
      });
      break;
    }
    case Task::MixtureEstimation: {
      const std::size_t per = cfg.interior_alphas + 2, pairs = cfg.dataset_size / per;
      for (std::size_t p = 0; p < pairs; ++p) {
        Rng rng(derive_seed(cfg.seed, {kSpecStream, p}));
        const ModelSpec left = sample_params(ModelKind::MeanReverting, rng, sd);
        const ModelSpec right = sample_params(ModelKind::RBergomi, rng, sd);
        for (std::size_t a = 0; a < per; ++a) {
          // Interior weights are uniform on [0, 1); the pair then adds both endpoints.
          const double alpha = a < cfg.interior_alphas ? rng.uniform() : static_cast<double>(a - cfg.interior_alphas);
          auto& r = rows[p * per + a];
          r.spec = make_mixture(alpha, left, right);
          r.target = alpha;
        }
      }
      break;
    }
    case Task::GasTemperature:
      for (std::size_t i = 0; i < rows.size(); ++i) {
        Rng rng(derive_seed(cfg.seed, {kSpecStream, i}));
        rows[i].spec = sample_params(ModelKind::IdealGas, rng, sd);
        rows[i].target = std::get<IdealGasSpec>(rows[i].spec.params).temperature;
      }
      break;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].bundle_seed = derive_seed(cfg.seed, {kBundleStream, i});
  return rows;
}

PathBundle task_bundle(const ExperimentConfig& cfg, const TaskRow& row) {
  return simulate(row.spec, cfg.grid(), cfg.batch, row.bundle_seed);
}

std::vector<ReferenceSet> task_reference_sets(const ExperimentConfig& cfg, std::vector<std::size_t>* offsets) {
  cfg.validate();
  const ReferenceConfig rc = cfg.reference_config();
  std::vector<ReferenceSet> all;
  if (offsets) offsets->clear();
  for (std::size_t i = 0; i < cfg.b_ladder.size(); ++i) {
    if (offsets) offsets->push_back(all.size());
    auto step = build_reference_sets(cfg.b_ladder[i], cfg.dim(), rc, derive_seed(cfg.seed, {kRefStream, i}));
    all.insert(all.end(), std::make_move_iterator(step.begin()), std::make_move_iterator(step.end()));
  }
  return all;
}

std::span<const ReferenceSet> TaskDataset::ladder_refs(std::size_t step) const {
  if (step >= ladder_offsets.size()) fail(Errc::IndexOutOfRange, "ladder step out of range");
  const std::size_t end = step + 1 < ladder_offsets.size() ? ladder_offsets[step + 1] : refs.size();
  return std::span<const ReferenceSet>(refs).subspan(ladder_offsets[step], end - ladder_offsets[step]);
}

TaskDataset gen_task_dataset(const ExperimentConfig& cfg, const MmdApproximator& approx) {
  if (approx.level > cfg.approx_level)
    fail(Errc::InvalidConfig, "approximator level exceeds the cached reference signature level");
  TaskDataset ds;
  ds.rows = task_rows(cfg);
  ds.refs = task_reference_sets(cfg, &ds.ladder_offsets);
  const auto base_refs = ds.ladder_refs(cfg.b_ladder.size() - 1);
  const std::size_t n = ds.rows.size(), nb = base_refs.size();

  auto init = [&](FeatureTable& t, std::size_t cols) {
    t.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols));
    t.targets.resize(n);
    t.specs.resize(n);
    t.seeds.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      t.targets[i] = ds.rows[i].target;
      t.specs[i] = ds.rows[i].spec.to_json();
      t.seeds[i] = ds.rows[i].bundle_seed;
    }
  };
  init(ds.speedrs, ds.refs.size());
  init(ds.rbf, nb);
  init(ds.matern32, nb);

  const PointwiseKernel rbf{PointwiseKernel::Kind::Rbf, cfg.baseline_sigma};
  const PointwiseKernel matern{PointwiseKernel::Kind::Matern32, cfg.baseline_sigma};
  parallel_for(n, [&](std::size_t i) {
    const PathBundle b = task_bundle(cfg, ds.rows[i]);
    const auto r = static_cast<Eigen::Index>(i);
    const auto s = features_speedrs(b, ds.refs, approx);
    for (std::size_t k = 0; k < s.size(); ++k) ds.speedrs.features(r, static_cast<Eigen::Index>(k)) = s[k];
    const auto f1 = features_pointwise(b, base_refs, rbf, cfg.baseline_form, cfg.baseline_batch);
    const auto f2 = features_pointwise(b, base_refs, matern, cfg.baseline_form, cfg.baseline_batch);
    for (std::size_t k = 0; k < nb; ++k) {
      ds.rbf.features(r, static_cast<Eigen::Index>(k)) = f1[k];
      ds.matern32.features(r, static_cast<Eigen::Index>(k)) = f2[k];
    }
  });
  return ds;
}

// ---------------------------------------------------------------------------
// Training

ExperimentResult run_experiment(const ExperimentConfig& cfg, const FeatureTable& speedrs,
                                std::span<const std::size_t> ladder_offsets, const FeatureTable& rbf,
                                const FeatureTable& matern32) {
  cfg.validate();
  const std::size_t steps = cfg.b_ladder.size();
  if (ladder_offsets.size() != steps) fail(Errc::ShapeMismatch, "ladder offsets do not match b_ladder");
  struct Job {
    std::string model;
    std::size_t b, width;
    const FeatureTable* table;
    std::size_t offset, count;
    double lr;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < steps; ++i) {
    const std::size_t end = i + 1 < steps ? ladder_offsets[i + 1] : static_cast<std::size_t>(speedrs.features.cols());
    jobs.push_back({"speedrs", cfg.b_ladder[i], cfg.widths[i], &speedrs, ladder_offsets[i], end - ladder_offsets[i],
                    cfg.train.initial_lr});
  }
  for (const auto* t : {&rbf, &matern32}) {
    const std::size_t cols = static_cast<std::size_t>(t->features.cols());
    jobs.push_back({t == &rbf ? "rbf" : "matern32", cfg.b_max(), cfg.widths.back(), t, 0, cols, cfg.baseline_lr});
  }
  for (const auto& j : jobs)
    if (j.offset + j.count > static_cast<std::size_t>(j.table->features.cols()) || j.table->rows() != speedrs.rows())
      fail(Errc::ShapeMismatch, "feature table does not match the experiment config");

  const std::size_t n_runs = jobs.size() * cfg.n_seeds;
  std::vector<FitResult> fits(n_runs);
  parallel_for(n_runs, [&](std::size_t r) {
    const auto& j = jobs[r % jobs.size()];
    TrainConfig tc = cfg.train;
    tc.initial_lr = j.lr;
    // Every model of one seed index sees the same split.
    tc.seed = derive_seed(cfg.seed, {kTrainStream, r / jobs.size()});
    fits[r] = train_regressor(j.table->column_block(j.offset, j.count), j.width, cfg.activation, tc);
  });

  ExperimentResult out;
  for (std::size_t r = 0; r < n_runs; ++r) {
    const auto& j = jobs[r % jobs.size()];
    out.runs.push_back({j.model, j.b, j.width, r / jobs.size(), fits[r].train_mse, fits[r].valid_mse});
    if (r < jobs.size()) {
      Json meta{{"kind", "task-regressor"}, {"task", to_string(cfg.task)}, {"model", j.model}, {"b", j.b}};
      fits[r].model.metadata = meta.dump();
      out.seed0_models.push_back(std::move(fits[r].model));
      out.seed0_names.push_back(j.model == "speedrs" ? "speedrs_B" + std::to_string(j.b) : j.model);
    }
  }
  return out;
}

std::vector<Table2Row> aggregate_runs(Task task, std::span<const RunMetric> runs) {
  std::vector<Table2Row> out;
  std::vector<std::vector<RunMetric>> groups;
  for (const auto& r : runs) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const Table2Row& t) { return t.model == r.model && t.b == r.b && t.width == r.width; });
    if (it == out.end()) {
      out.push_back({to_string(task), r.model, r.b, r.width});
      groups.emplace_back();
      it = out.end() - 1;
    }
    groups[static_cast<std::size_t>(it - out.begin())].push_back(r);
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    auto& runs_g = groups[g];
    // Seed order makes the reductions independent of run scheduling.
    std::sort(runs_g.begin(), runs_g.end(), [](const RunMetric& a, const RunMetric& b) { return a.seed_index < b.seed_index; });
    std::vector<double> tr, va;
    for (const auto& r : runs_g) {
      tr.push_back(r.train_mse);
      va.push_back(r.valid_mse);
    }
    out[g].train_mse = mean(tr);
    out[g].train_sd = sample_sd(tr);
    out[g].valid_mse = mean(va);
    out[g].valid_sd = sample_sd(va);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Out-of-regime sweeps

std::vector<OosRow> oos_test(const ExperimentConfig& cfg, const OosModels& m) {
  cfg.validate();
  if (cfg.task == Task::GasTemperature) fail(Errc::InvalidConfig, "the gas task has no out-of-regime sweep");
  if (!m.approx || !m.speedrs || !m.rbf || !m.matern32) fail(Errc::InvalidArgument, "oos_test needs every model");

  struct Point {
    std::string sweep;
    double x;
    ModelSpec spec;
    double target;
  };
  std::vector<Point> points;
  const auto grid = cfg.grid();
  const auto xs = linspace(0.0, 1.0, cfg.oos_points);
  const std::uint64_t base = derive_seed(cfg.seed, kOosStream);

  if (cfg.task == Task::Pricing) {
    // Fixed mixture pair over the whole weight range.
    MeanRevertingSpec mr{0.15, 0.4, 0.23, 0.25, -0.94, 0.65, cfg.x0};
    RBergomiSpec rb{0.1, 1.2, 0.25, -0.85, cfg.x0};
    const auto prices = price_barrier_mixtures(xs, ModelSpec{mr}, ModelSpec{rb}, grid, cfg.mc_paths,
                                               derive_seed(base, 1), cfg.strike, cfg.barrier);
    for (std::size_t i = 0; i < xs.size(); ++i)
      points.push_back({"mixture_alpha", xs[i], make_mixture(xs[i], ModelSpec{mr}, ModelSpec{rb}), prices[i].price});
    // Unseen model classes, swept over the training sigma range.
    const auto sigmas = linspace(0.2, 0.8, cfg.oos_points);
    std::vector<Point> unseen;
    for (double s : sigmas) unseen.push_back({"gbm_sigma", s, ModelSpec{GbmSpec{0.1, s, cfg.x0}}, 0.0});
    for (double s : sigmas) unseen.push_back({"cev_sigma", s, ModelSpec{CevSpec{0.1, s, 0.75, cfg.x0}}, 0.0});
    parallel_for(unseen.size(), [&](std::size_t i) {
      unseen[i].target =
          price_barrier_model(unseen[i].spec, grid, cfg.mc_paths, derive_seed(base, {2, i}), cfg.strike, cfg.barrier).price;
    });
    points.insert(points.end(), unseen.begin(), unseen.end());
  } else {
    SamplingDefaults sd{cfg.x0, cfg.batch, cfg.gas_volume};
    Rng rng(derive_seed(base, 1));
    const ModelSpec rb = sample_params(ModelKind::RBergomi, rng, sd);
    const ModelSpec cev = sample_params(ModelKind::Cev, rng, sd);
    const ModelSpec mr = sample_params(ModelKind::MeanReverting, rng, sd);
    for (double a : xs) points.push_back({"rbergomi_cev", a, make_mixture(a, rb, cev), a});
    for (double a : xs) points.push_back({"cev_mean_reverting", a, make_mixture(a, cev, mr), a});
  }

  const Featurizer fs{Featurizer::Kind::Speedrs, m.approx, cfg.baseline_form, cfg.baseline_batch};
  Featurizer fr = fs, fm = fs;
  fr.kind = Featurizer::Kind::Rbf;
  fm.kind = Featurizer::Kind::Matern32;
  fr.sigma = fm.sigma = cfg.baseline_sigma;
  const std::pair<const char*, std::pair<const Regressor*, const Featurizer*>> models[] = {
      {"speedrs", {m.speedrs, &fs}}, {"rbf", {m.rbf, &fr}}, {"matern32", {m.matern32, &fm}}};
  constexpr std::size_t kModels = std::size(models);

  // One job per (point, sampling); each averages oos_runs fresh bundles.
  const std::size_t n_jobs = points.size() * 2;
  std::vector<OosRow> out(n_jobs * kModels);
  parallel_for(n_jobs, [&](std::size_t job) {
    const auto& pt = points[job / 2];
    const bool irregular = job % 2 == 1;
    double sums[kModels] = {};
    bool rejected[kModels] = {};
    for (std::size_t run = 0; run < cfg.oos_runs; ++run) {
      // Regular and irregular variants share the underlying bundles.
      const std::uint64_t s = derive_seed(base, {3, job / 2, run});
      PathBundle b = simulate(pt.spec, grid, cfg.batch, s);
      if (irregular)
        for (std::size_t p = 0; p < b.paths.size(); ++p)
          b.paths[p] = subsample_irregular(b.paths[p], cfg.keep_prob, derive_seed(s, {4, p}));
      for (std::size_t k = 0; k < kModels; ++k) {
        if (rejected[k]) continue;
        try {
          sums[k] += predict(*models[k].second.first, m.refs, *models[k].second.second, b);
        } catch (const Error& e) {
          if (e.code() != Errc::LengthMismatch) throw;
          rejected[k] = true;
        }
      }
    }
    for (std::size_t k = 0; k < kModels; ++k) {
      OosRow& r = out[job * kModels + k];
      r.sweep = pt.sweep;
      r.sampling = oos_sampling_name(irregular);
      r.x = pt.x;
      r.model = models[k].first;
      r.target = pt.target;
      if (rejected[k]) {
        r.status = "length_mismatch";
      } else {
        r.prediction = sums[k] / static_cast<double>(cfg.oos_runs);
        r.status = "ok";
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// CSV files

void write_runs_csv(const std::string& file, Task task, std::span<const RunMetric> runs) {
  auto out = open_out(file);
  out << "task,model,B,width,seed_index,train_mse,valid_mse\n";
  for (const auto& r : runs)
    out << to_string(task) << ',' << r.model << ',' << r.b << ',' << r.width << ',' << r.seed_index << ','
        << format_double(r.train_mse) << ',' << format_double(r.valid_mse) << '\n';
  close_checked(out, file);
}

std::vector<RunMetric> read_runs_csv(const std::string& file) {
  std::ifstream in(file);
  if (!in) fail(Errc::Io, "cannot read " + file);
  const auto header = read_csv_header(in, file);
  if (header != std::vector<std::string>{"task", "model", "B", "width", "seed_index", "train_mse", "valid_mse"})
    fail(Errc::Io, file + ": unexpected runs header");
  std::vector<RunMetric> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = parse_csv_line(line);
    if (f.size() != 7) fail(Errc::Io, file + ": malformed runs row");
    out.push_back({f[1], parse_u64(f[2]), parse_u64(f[3]), parse_u64(f[4]), parse_double(f[5]), parse_double(f[6])});
  }
  return out;
}

void write_table2_csv(const std::string& file, std::span<const Table2Row> rows) {
  auto out = open_out(file);
  out << "task,model,B,width,train_mse,train_sd,valid_mse,valid_sd\n";
  for (const auto& r : rows)
    out << r.task << ',' << r.model << ',' << r.b << ',' << r.width << ',' << format_double(r.train_mse) << ','
        << format_double(r.train_sd) << ',' << format_double(r.valid_mse) << ',' << format_double(r.valid_sd) << '\n';
  close_checked(out, file);
}

void write_oos_csv(const std::string& file, std::span<const OosRow> rows) {
  auto out = open_out(file);
  out << "sweep,sampling,x,model,prediction,target,status\n";
  for (const auto& r : rows)
    out << r.sweep << ',' << r.sampling << ',' << format_double(r.x) << ',' << r.model << ','
        << (r.prediction ? format_double(*r.prediction) : "") << ',' << format_double(r.target) << ',' << r.status
        << '\n';
  close_checked(out, file);
}

// ---------------------------------------------------------------------------
// Verbs

namespace {

const std::vector<std::string> kVerbs = {"gen-mmd-corpus", "train-approximator", "gen-task", "train", "evaluate",
                                         "oos",            "report",             "simulate", "gram", "mmd-matrix"};

std::vector<std::string> known_keys() {
  std::vector<std::string> keys;
  for (const Config& c : {ApproximatorExperiment{}.to_config(), ExperimentConfig{}.to_config()})
    for (const auto& [k, v] : c.values()) keys.push_back(k);
  for (const char* k : {"approximator", "debug.model_a", "debug.model_b", "debug.n_paths", "debug.length",
                        "debug.sigma", "debug.dyadic_order"})
    keys.push_back(k);
  return keys;
}

bool task_verb(const std::string& verb) {
  return verb == "gen-task" || verb == "train" || verb == "evaluate" || verb == "oos";
}

// Writes files relative to a workdir and remembers what was written.
class Outputs {
 public:
  explicit Outputs(fs::path root) : root_(std::move(root)) {}
  std::string path(const std::string& rel) {
    const fs::path p = root_ / rel;
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) fail(Errc::Io, "cannot create " + p.parent_path().string());
    if (std::find(written_.begin(), written_.end(), rel) == written_.end()) written_.push_back(rel);
    return p.string();
  }
  std::string in(const std::string& rel) const { return (root_ / rel).string(); }
  bool exists(const std::string& rel) const { return fs::exists(root_ / rel); }
  const std::vector<std::string>& written() const { return written_; }

 private:
  fs::path root_;
  std::vector<std::string> written_;
};

std::string task_dir(const ExperimentConfig& cfg) { return std::string("tasks/") + to_string(cfg.task) + "/"; }

std::string approximator_file(const Config& c, std::size_t level) {
  return c.get_string("approximator", "approximator/approx_L" + std::to_string(level) + ".ckpt");
}

void warn_paper_scale(const std::string& what) {
  std::cerr << "warning: paper-scale " << what << '\n';
}

void verb_gen_corpus(const ApproximatorExperiment& ax, bool paper_scale, Outputs& o) {
  if (paper_scale) warn_paper_scale("corpus; the reference GPU run took approximately 1 hour");
  const auto rows = build_mmd_dataset(ax.corpus);
  write_corpus_csv(o.path("corpus/corpus.csv"), rows);
}

void verb_train_approximator(const ApproximatorExperiment& ax, std::size_t serve_level, Outputs& o) {
  const auto rows = read_corpus_csv(o.in("corpus/corpus.csv"));
  if (rows.empty()) fail(Errc::Io, "empty corpus");
  if (corpus_level(rows.front()) < *std::max_element(ax.levels.begin(), ax.levels.end()))
    fail(Errc::InvalidConfig, "corpus level is below a requested approximator level");
  std::vector<MmdRow> nonzero;
  for (const auto& r : rows)
    if (!r.zero()) nonzero.push_back(r);

  struct Job {
    std::size_t level, seed_index;
    bool augmented;
  };
  std::vector<Job> jobs;
  for (auto l : ax.levels)
    for (std::size_t s = 0; s < ax.n_seeds; ++s) jobs.push_back({l, s, true});
  const bool ablate = ax.ablation && std::count(ax.levels.begin(), ax.levels.end(), serve_level) > 0;
  if (ablate) jobs.push_back({serve_level, 0, false});

  std::vector<ApproximatorFit> fits(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    TrainConfig tc = ax.train;
    tc.seed = derive_seed(ax.corpus.seed, {kApproxTrainStream, jobs[i].seed_index});
    const auto& data = jobs[i].augmented ? rows : nonzero;
    fits[i] = train_approximator(data, jobs[i].level, default_approx_width(jobs[i].level), tc);
  });

  {
    const std::string f = o.path("approximator/runs.csv");
    auto out = open_out(f);
    out << "level,width,seed_index,variant,train_mse,valid_mse\n";
    for (std::size_t i = 0; i < jobs.size(); ++i)
      out << jobs[i].level << ',' << default_approx_width(jobs[i].level) << ',' << jobs[i].seed_index << ','
          << (jobs[i].augmented ? "augmented" : "no_zero_rows") << ',' << format_double(fits[i].train_mse) << ','
          << format_double(fits[i].valid_mse) << '\n';
    close_checked(out, f);
  }
  const ApproximatorFit* serve = nullptr;
  const ApproximatorFit* ablated = nullptr;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (jobs[i].seed_index != 0) continue;
    if (jobs[i].augmented) {
      save_approximator(o.path("approximator/approx_L" + std::to_string(jobs[i].level) + ".ckpt"), fits[i].model);
      if (jobs[i].level == serve_level) serve = &fits[i];
    } else {
      save_approximator(o.path("approximator/approx_L" + std::to_string(jobs[i].level) + "_no_zero_rows.ckpt"),
                        fits[i].model);
      ablated = &fits[i];
    }
  }

  // Diagnostics at the serving level; both variants see identical trials.
  const std::string df = o.path("approximator/diagnostics.csv");
  auto diag = open_out(df);
  diag << "level,variant,metric,value\n";
  if (serve) {
    DiagnosticsConfig dc;
    dc.n_tests = ax.diag_tests;
    dc.batch = ax.corpus.batch;
    dc.grid = ax.corpus.grid;
    dc.kinds = ax.corpus.kinds;
    dc.seed = derive_seed(ax.corpus.seed, kDiagStream);
    diag << serve_level << ",augmented,pass_fraction," << format_double(metric_diagnostics(serve->model, dc)) << '\n';
    if (ablated)
      diag << serve_level << ",no_zero_rows,pass_fraction," << format_double(metric_diagnostics(ablated->model, dc))
           << '\n';
    if (ax.heldout_pairs > 0) {
      std::vector<MmdRow> held(ax.heldout_pairs);
      parallel_for(held.size(), [&](std::size_t i) {
        held[i] = make_mmd_row(ax.corpus, derive_seed(ax.corpus.seed, {kHeldoutStream, i}), false);
      });
      std::vector<double> oracle, pred;
      const std::string hf = o.path("approximator/heldout.csv");
      auto ho = open_out(hf);
      ho << "pair,oracle,prediction\n";
      const std::size_t half = approx_sig_size(serve_level);
      for (std::size_t i = 0; i < held.size(); ++i) {
        const auto f = project_feature(held[i].feature, serve_level);
        const std::span<const double> fs(f);
        oracle.push_back(held[i].target);
        pred.push_back(approx_distance(serve->model, fs.first(half), fs.subspan(half)));
        ho << i << ',' << format_double(oracle.back()) << ',' << format_double(pred.back()) << '\n';
      }
      close_checked(ho, hf);
      diag << serve_level << ",augmented,heldout_spearman," << format_double(spearman(oracle, pred)) << '\n';
    }
  }
  close_checked(diag, df);
}

std::vector<double> read_label_se(const std::string& file) {
  std::ifstream in(file);
  if (!in) return {};
  read_csv_header(in, file);
  std::vector<double> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(parse_double(parse_csv_line(line).at(3)));
  return out;
}

void verb_gen_task(const ExperimentConfig& cfg, const Config& c, Outputs& o) {
  if (cfg.paper_scale) warn_paper_scale("task dataset; the reference GPU experiments took approximately 2 hours");
  const auto approx = load_approximator(o.in(approximator_file(c, cfg.approx_level)));
  const auto ds = gen_task_dataset(cfg, approx);
  const std::string dir = task_dir(cfg);
  write_feature_csv(o.path(dir + "features_speedrs.csv"), ds.speedrs);
  write_feature_csv(o.path(dir + "features_rbf.csv"), ds.rbf);
  write_feature_csv(o.path(dir + "features_matern32.csv"), ds.matern32);
  {
    const std::string f = o.path(dir + "labels.csv");
    auto out = open_out(f);
    out << "row,spec,target,target_se,seed\n";
    for (std::size_t i = 0; i < ds.rows.size(); ++i)
      out << i << ',' << csv_field(ds.rows[i].spec.to_json()) << ',' << format_double(ds.rows[i].target) << ','
          << format_double(ds.rows[i].target_se) << ',' << ds.rows[i].bundle_seed << '\n';
    close_checked(out, f);
  }
  {
    const std::string f = o.path(dir + "references.json");
    auto out = open_out(f);
    out << reference_manifest(ds.refs, cfg.reference_config()) << '\n';
    close_checked(out, f);
  }
  if (cfg.save_bundles) {
    const std::string f = o.path(dir + "bundles.pb1");
    o.path(dir + "bundles.pb1.json");
    std::ofstream out(f, std::ios::binary);
    std::ofstream side(f + ".json");
    if (!out || !side) fail(Errc::Io, "cannot write " + f);
    // Simulation is cheap next to featurization, so bundles are regenerated
    // here in row order instead of being held in memory.
    for (const auto& r : ds.rows) {
      const auto b = task_bundle(cfg, r);
      write_pb1(out, b);
      side << b.model_id << '\n';
    }
    close_checked(out, f);
  }
}

struct LoadedTables {
  FeatureTable speedrs, rbf, matern32;
  std::vector<std::size_t> offsets;
};

LoadedTables load_tables(const ExperimentConfig& cfg, const Outputs& o) {
  const std::string dir = task_dir(cfg);
  LoadedTables t{read_feature_csv(o.in(dir + "features_speedrs.csv")), read_feature_csv(o.in(dir + "features_rbf.csv")),
                 read_feature_csv(o.in(dir + "features_matern32.csv")), {}};
  std::size_t acc = 0;
  for (auto b : cfg.b_ladder) {
    t.offsets.push_back(acc);
    acc += b;
  }
  if (static_cast<std::size_t>(t.speedrs.features.cols()) != acc)
    fail(Errc::ShapeMismatch, "SPEEDRS features do not match b_ladder; regenerate the task dataset");
  return t;
}

void verb_train(const ExperimentConfig& cfg, Outputs& o) {
  const auto t = load_tables(cfg, o);
  const auto res = run_experiment(cfg, t.speedrs, t.offsets, t.rbf, t.matern32);
  const std::string dir = task_dir(cfg);
  write_runs_csv(o.path(dir + "runs.csv"), cfg.task, res.runs);
  write_table2_csv(o.path(dir + "table2.csv"), aggregate_runs(cfg.task, res.runs));
  for (std::size_t i = 0; i < res.seed0_models.size(); ++i)
    save_regressor(o.path(dir + "model_" + res.seed0_names[i] + ".ckpt"), res.seed0_models[i]);
}

void verb_evaluate(const ExperimentConfig& cfg, Outputs& o) {
  const auto t = load_tables(cfg, o);
  const std::string dir = task_dir(cfg);
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, {kTrainStream, 0});
  const Split split = regressor_split(t.speedrs.rows(), tc);
  std::vector<const char*> which(t.speedrs.rows(), "train");
  for (auto i : split.valid) which[i] = "valid";

  const std::string f = o.path(dir + "predictions.csv");
  auto out = open_out(f);
  out << "row,split,model,B,target,prediction\n";
  auto emit = [&](const std::string& model, std::size_t b, const Regressor& reg, const FeatureTable& table) {
    const Eigen::VectorXd p = reg.predict_batch(table.features);
    for (std::size_t i = 0; i < table.rows(); ++i)
      out << i << ',' << which[i] << ',' << model << ',' << b << ',' << format_double(table.targets[i]) << ','
          << format_double(p(static_cast<Eigen::Index>(i))) << '\n';
  };
  for (std::size_t s = 0; s < cfg.b_ladder.size(); ++s) {
    const auto b = cfg.b_ladder[s];
    const auto reg = load_regressor(o.in(dir + "model_speedrs_B" + std::to_string(b) + ".ckpt"));
    emit("speedrs", b, reg, t.speedrs.column_block(t.offsets[s], b));
  }
  emit("rbf", cfg.b_max(), load_regressor(o.in(dir + "model_rbf.ckpt")), t.rbf);
  emit("matern32", cfg.b_max(), load_regressor(o.in(dir + "model_matern32.ckpt")), t.matern32);
  close_checked(out, f);
}

void verb_oos(const ExperimentConfig& cfg, const Config& c, Outputs& o) {
  const std::string dir = task_dir(cfg);
  const auto approx = load_approximator(o.in(approximator_file(c, cfg.approx_level)));
  std::vector<std::size_t> offsets;
  const auto refs = task_reference_sets(cfg, &offsets);
  const auto last = std::span<const ReferenceSet>(refs).subspan(offsets.back());
  const auto sp = load_regressor(o.in(dir + "model_speedrs_B" + std::to_string(cfg.b_max()) + ".ckpt"));
  const auto rb = load_regressor(o.in(dir + "model_rbf.ckpt"));
  const auto ma = load_regressor(o.in(dir + "model_matern32.ckpt"));
  write_oos_csv(o.path(dir + "oos.csv"), oos_test(cfg, {&approx, last, &sp, &rb, &ma}));
}

void verb_report(Outputs& o) {
  std::vector<Table2Row> table2;
  std::vector<std::string> label_notes;
  for (auto t : {Task::Pricing, Task::MixtureEstimation, Task::GasTemperature}) {
    const std::string dir = std::string("tasks/") + to_string(t) + "/";
    if (!o.exists(dir + "runs.csv")) continue;
    const auto rows = aggregate_runs(t, read_runs_csv(o.in(dir + "runs.csv")));
    table2.insert(table2.end(), rows.begin(), rows.end());
    const auto se = read_label_se(o.in(dir + "labels.csv"));
    if (!se.empty() && t == Task::Pricing) {
      double v = 0.0;
      for (double s : se) v += s * s;
      label_notes.push_back(std::string(to_string(t)) + ": mean Monte Carlo label variance " +
                            format_double(v / static_cast<double>(se.size())));
    }
  }
  struct T1 {
    std::size_t level, width;
    std::vector<double> tr, va;
  };
  std::vector<T1> table1;
  if (o.exists("approximator/runs.csv")) {
    std::ifstream in(o.in("approximator/runs.csv"));
    read_csv_header(in, "approximator/runs.csv");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = parse_csv_line(line);
      if (f.size() != 6) fail(Errc::Io, "approximator/runs.csv: malformed row");
      if (f[3] != "augmented") continue;
      const std::size_t level = parse_u64(f[0]);
      auto it = std::find_if(table1.begin(), table1.end(), [&](const T1& t) { return t.level == level; });
      if (it == table1.end()) {
        table1.push_back({level, static_cast<std::size_t>(parse_u64(f[1])), {}, {}});
        it = table1.end() - 1;
      }
      it->tr.push_back(parse_double(f[4]));
      it->va.push_back(parse_double(f[5]));
    }
  }
  if (table2.empty() && table1.empty()) fail(Errc::Io, "no results to report");

  if (!table1.empty()) {
    const std::string f = o.path("report/table1.csv");
    auto out = open_out(f);
    out << "level,width,train_mse,train_sd,valid_mse,valid_sd\n";
    for (const auto& t : table1)
      out << t.level << ',' << t.width << ',' << format_double(mean(t.tr)) << ',' << format_double(sample_sd(t.tr))
          << ',' << format_double(mean(t.va)) << ',' << format_double(sample_sd(t.va)) << '\n';
    close_checked(out, f);
  }
  if (!table2.empty()) write_table2_csv(o.path("report/table2.csv"), table2);

  const std::string f = o.path("report/summary.md");
  auto md = open_out(f);
  md << "# Results\n\n";
  if (!table1.empty()) {
    md << "## Distance approximator\n\n| level | width | train MSE | valid MSE |\n|---|---|---|---|\n";
    for (const auto& t : table1)
      md << "| " << t.level << " | " << t.width << " | " << format_double(mean(t.tr)) << " (" << format_double(sample_sd(t.tr))
         << ") | " << format_double(mean(t.va)) << " (" << format_double(sample_sd(t.va)) << ") |\n";
    md << '\n';
  }
  if (!table2.empty()) {
    md << "## Tasks\n\n| task | model | B | width | train MSE | valid MSE |\n|---|---|---|---|---|---|\n";
    for (const auto& r : table2)
      md << "| " << r.task << " | " << r.model << " | " << r.b << " | " << r.width << " | " << format_double(r.train_mse)
         << " (" << format_double(r.train_sd) << ") | " << format_double(r.valid_mse) << " (" << format_double(r.valid_sd)
         << ") |\n";
    md << '\n';
  }
  for (const auto& n : label_notes) md << "- " << n << '\n';
  close_checked(md, f);
}

ModelSpec debug_spec(const Config& c, const std::string& key, const std::string& fallback, std::uint64_t seed) {
  const std::string v = c.get_string(key, fallback);
  if (!v.empty() && v.front() == '{') return ModelSpec::from_json(v);
  Rng rng(seed);
  return sample_params(model_kind_from_string(v), rng);
}

void verb_debug(const std::string& verb, const Config& c, Outputs& o) {
  const std::uint64_t seed = c.get_u64("seed", 0);
  const std::size_t n = c.get_size("debug.n_paths", 20);
  const SimGrid grid{1.0, c.get_size("debug.length", 15) - 1};
  const ModelSpec a = debug_spec(c, "debug.model_a", "gbm", derive_seed(seed, 1));
  const PathBundle ba = simulate(a, grid, n, derive_seed(seed, 2));
  if (verb == "simulate") {
    write_pb1_file(o.path("debug/simulate.pb1"), {ba});
    o.path("debug/simulate.pb1.json");
    return;
  }
  const ModelSpec b = debug_spec(c, "debug.model_b", "rbergomi", derive_seed(seed, 3));
  const PathBundle bb = simulate(b, grid, n, derive_seed(seed, 4));
  const auto xa = kernel_inputs(ba), xb = kernel_inputs(bb);
  auto write_matrix = [&](const std::string& rel, const Eigen::MatrixXd& m) {
    const std::string f = o.path(rel);
    auto out = open_out(f);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) out << format_double(m(i, j)) << (j + 1 < m.cols() ? ',' : '\n');
    close_checked(out, f);
  };
  GoursatConfig gc;
  gc.dyadic_order = static_cast<unsigned>(c.get_size("debug.dyadic_order", 1));
  const StaticKernel k = StaticKernel::rbf(c.get_double("debug.sigma", 0.5));
  if (verb == "gram") {
    write_matrix("debug/gram_xy.csv", gram_matrix(xa, xb, k, gc, false));
    return;
  }
  Mmd2Options opt;
  opt.kernel = k;
  opt.inner = opt.outer = gc;
  const auto r = mmd2_detailed(xa, xb, opt);
  write_matrix("debug/mmd2_kxx.csv", r.k_xx);
  write_matrix("debug/mmd2_kyy.csv", r.k_yy);
  write_matrix("debug/mmd2_kxy.csv", r.k_xy);
}

}  // namespace

const std::vector<std::string>& verb_names() { return kVerbs; }

std::vector<std::string> run_verb(const std::string& verb, const Config& c, const std::string& workdir) {
  if (std::find(kVerbs.begin(), kVerbs.end(), verb) == kVerbs.end()) fail(Errc::InvalidConfig, "unknown verb '" + verb + "'");
  c.require_known(known_keys());
  Outputs o{fs::path(workdir)};

  // The manifest stores every resolved setting, so reruns do not depend on defaults.
  Config resolved = c;
  std::string manifest = "manifests/" + verb;
  if (verb == "gen-mmd-corpus" || verb == "train-approximator") {
    const auto ax = ApproximatorExperiment::from_config(c);
    resolved.merge(ax.to_config());
    if (verb == "gen-mmd-corpus") {
      verb_gen_corpus(ax, c.get_bool("paper_scale", false), o);
    } else {
      verb_train_approximator(ax, c.get_size("approx_level", 3), o);
    }
  } else if (task_verb(verb)) {
    const auto cfg = ExperimentConfig::from_config(c);
    resolved.merge(cfg.to_config());
    manifest += std::string(".") + to_string(cfg.task);
    if (verb == "gen-task") verb_gen_task(cfg, c, o);
    if (verb == "train") verb_train(cfg, o);
    if (verb == "evaluate") verb_evaluate(cfg, o);
    if (verb == "oos") verb_oos(cfg, c, o);
  } else if (verb == "report") {
    verb_report(o);
  } else {
    verb_debug(verb, c, o);
  }

  Json j;
  j["verb"] = verb;
  j["config"] = resolved.values();
  j["config_digest"] = digest_hex(resolved.canonical());
  j["outputs"] = Json::object();
  for (const auto& rel : o.written()) j["outputs"][rel] = digest_hex(read_file(o.in(rel)));
  const std::string mf = o.path(manifest + ".json");
  auto out = open_out(mf);
  out << j.dump(1) << '\n';
  close_checked(out, mf);
  auto written = o.written();
  return written;
}

Config config_from_manifest(const std::string& file, std::string* verb) {
  Json j;
  try {
    j = Json::parse(read_file(file));
  } catch (const Json::exception& e) {
    fail(Errc::Io, file + ": malformed manifest: " + e.what());
  }
  Config c;
  try {
    for (const auto& [k, v] : j.at("config").items()) c.set(k, v.get<std::string>());
    if (verb) *verb = j.at("verb").get<std::string>();
  } catch (const Json::exception& e) {
    fail(Errc::Io, file + ": malformed manifest: " + e.what());
  }
  return c;
}

}  // namespace speedrs
