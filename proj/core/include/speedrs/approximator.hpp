#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "speedrs/mmd.hpp"
#include "speedrs/model_spec.hpp"
#include "speedrs/neural.hpp"
#include "speedrs/sde.hpp"

namespace speedrs {

/// How the distance corpus is simulated and labelled.
struct CorpusConfig {
  std::size_t n_rows = 3000;
  double zero_fraction = 0.25;
  std::size_t batch = 100;  // paths per bundle; even (rBergomi pairs)
  SimGrid grid{1.0, 14};
  std::size_t level = 4;  // stored truncation; lower levels are prefixes
  Mmd2Options oracle;
  std::vector<ModelKind> kinds{ModelKind::Gbm, ModelKind::MeanReverting, ModelKind::RBergomi};
  std::uint64_t seed = 0;
  void validate() const;
};

struct MmdRow {
  std::vector<double> feature;  // expected signature of A, then of B
  double target = 0.0;          // max(0, unbiased second-order MMD^2)
  std::string spec_a, spec_b;
  std::uint64_t seed = 0;
  bool zero() const { return target == 0.0 && spec_a == spec_b; }
};

/// Labelled pair of independently drawn models. Zero rows draw one spec and
/// two independent bundles and carry target exactly 0.
MmdRow make_mmd_row(const CorpusConfig& cfg, std::uint64_t row_seed, bool zero_row);

/// The last round(zero_fraction * n_rows) rows are zero rows; row i uses
/// derive_seed(seed, i). Rows are built in parallel.
std::vector<MmdRow> build_mmd_dataset(const CorpusConfig& cfg);

/// Level a corpus was stored at, from its feature length. Throws DimMismatch.
std::size_t corpus_level(const MmdRow& row);

/// Feature of a row cut down to `level`: truncate each half, re-concatenate.
std::vector<double> project_feature(std::span<const double> feature, std::size_t level);

/// Length of one expected signature of a 1-d path after the lift.
std::size_t approx_sig_size(std::size_t level);

/// Hidden width used for a truncation level: 25 / 60 / 90 for L = 2 / 3 / 4.
std::size_t default_approx_width(std::size_t level);

struct MmdApproximator {
  Regressor reg;
  std::size_t level = 3;
  bool symmetrize = true;
  bool clamp = true;
};

struct ApproximatorFit {
  MmdApproximator model;
  TrainHistory history;
  double train_mse = 0.0, valid_mse = 0.0;
};

ApproximatorFit train_approximator(std::span<const MmdRow> rows, std::size_t level, std::size_t hidden,
                                   const TrainConfig& cfg);

/// Symmetrized (f(a,b) + f(b,a)) / 2 when enabled, clamped at 0 when enabled.
/// Inputs have length approx_sig_size(level). Throws DimMismatch.
double approx_distance(const MmdApproximator& m, std::span<const double> sig_a, std::span<const double> sig_b);

struct DiagnosticsConfig {
  std::size_t n_tests = 300;
  std::size_t batch = 100;
  SimGrid grid{1.0, 14};
  double threshold = 0.1;
  std::vector<ModelKind> kinds{ModelKind::Gbm, ModelKind::MeanReverting, ModelKind::RBergomi};
  std::uint64_t seed = 0;
};

/// Fraction of trials where two independent bundles of one random model
/// are mapped to a distance below the threshold.
double metric_diagnostics(const MmdApproximator& m, const DiagnosticsConfig& cfg);

void save_approximator(const std::string& file, const MmdApproximator& m);
MmdApproximator load_approximator(const std::string& file);

/// Columns f_0..f_{k-1}, target, spec_a, spec_b, seed.
void write_corpus_csv(const std::string& file, std::span<const MmdRow> rows);
std::vector<MmdRow> read_corpus_csv(const std::string& file);

}  // namespace speedrs
