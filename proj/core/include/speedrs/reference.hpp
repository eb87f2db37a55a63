#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "speedrs/approximator.hpp"
#include "speedrs/model_spec.hpp"
#include "speedrs/neural.hpp"
#include "speedrs/path.hpp"
#include "speedrs/sde.hpp"

namespace speedrs {

struct ReferenceConfig {
  std::size_t level = 3;             // truncation of the cached expected signature
  std::size_t sig_batch = 400;       // paths behind the expected signature
  std::size_t baseline_batch = 100;  // leading paths kept for pointwise baselines
  SimGrid grid{1.0, 14};
  SamplingDefaults defaults;         // x0 for the baselines' raw values
  void validate() const;
};

/// A fixed base process compared against marginal `marginal` of every input.
struct ReferenceSet {
  std::size_t id = 0;
  std::size_t marginal = 0;
  ModelSpec spec;
  std::uint64_t seed = 0;
  std::size_t sig_batch = 0;
  std::vector<double> exp_sig;  // expected lifted signature at the config level
  Eigen::MatrixXd samples;      // baseline_batch x length start-normalized values
};

/// Largest-remainder split of n into rBergomi : mean-reverting : GBM = 2:2:1.
std::array<std::size_t, 3> reference_class_counts(std::size_t n);

/// Rebuilds one reference set's caches from (spec, seed).
ReferenceSet make_reference_set(std::size_t id, std::size_t marginal, const ModelSpec& spec, std::uint64_t seed,
                                const ReferenceConfig& cfg);

/// b_total / d sets per marginal, ordered by (marginal, index). Throws
/// IndivisibleCount.
std::vector<ReferenceSet> build_reference_sets(std::size_t b_total, std::size_t d, const ReferenceConfig& cfg,
                                               std::uint64_t seed);

/// Approximate squared distances from each marginal of the bundle to each
/// reference set of that marginal, in reference order. Paths may have
/// different lengths and grids. Throws DimMismatch.
std::vector<double> features_speedrs(const PathBundle& bundle, std::span<const ReferenceSet> refs,
                                     const MmdApproximator& approx);

struct PointwiseKernel {
  enum class Kind { Rbf, Matern32 };
  Kind kind = Kind::Rbf;
  double sigma = 1.0;
  double operator()(std::span<const double> a, std::span<const double> b) const;
};

enum class BaselineForm {
  AsPrinted,       // N_x^-1, 2 (N_x N_z)^-1, N_z^-1
  StandardBiased,  // N_x^-2, 2 (N_x N_z)^-1, N_z^-2
};
BaselineForm baseline_form_from_string(const std::string& name);
const char* to_string(BaselineForm f) noexcept;

/// Every path of the bundle (at most max_paths of them) contributes one
/// start-normalized row per value coordinate to an (N d) x l matrix; each
/// feature compares that matrix with one reference sample matrix. Throws
/// LengthMismatch and ZeroInitialValue.
std::vector<double> features_pointwise(const PathBundle& bundle, std::span<const ReferenceSet> refs,
                                       const PointwiseKernel& k, BaselineForm form, std::size_t max_paths);

/// One feature per reference set from sample matrices (one sample per row).
double pointwise_feature(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z, const PointwiseKernel& k,
                         BaselineForm form);

/// Maps a bundle to a feature vector against a list of reference sets.
struct Featurizer {
  enum class Kind { Speedrs, Rbf, Matern32 };
  Kind kind = Kind::Speedrs;
  const MmdApproximator* approx = nullptr;  // Speedrs only
  BaselineForm form = BaselineForm::AsPrinted;
  std::size_t max_paths = 100;  // baselines only
  double sigma = 1.0;           // baselines only

  std::vector<double> operator()(const PathBundle& bundle, std::span<const ReferenceSet> refs) const;
};
Featurizer::Kind featurizer_kind_from_string(const std::string& name);
const char* to_string(Featurizer::Kind k) noexcept;

/// Featurize, then evaluate the regressor.
double predict(const Regressor& model, std::span<const ReferenceSet> refs, const Featurizer& f,
               const PathBundle& bundle);

struct FeatureTable {
  Eigen::MatrixXd features;  // one row per process
  std::vector<double> targets;
  std::vector<std::string> specs;
  std::vector<std::uint64_t> seeds;
  std::size_t rows() const noexcept { return targets.size(); }
  void validate() const;
  Dataset dataset() const;
  /// Feature columns [offset, offset + count) with all row metadata.
  FeatureTable column_block(std::size_t offset, std::size_t count) const;
};

/// Columns ref_0..ref_{k-1}, target, spec, seed.
void write_feature_csv(const std::string& file, const FeatureTable& t);
FeatureTable read_feature_csv(const std::string& file);

/// Standardize, split 80:20 and train.
FitResult train_regressor(const FeatureTable& table, std::size_t hidden, Activation act, const TrainConfig& cfg);

/// Reference specs, seeds and cache digests as JSON.
std::string reference_manifest(std::span<const ReferenceSet> refs, const ReferenceConfig& cfg);
/// Rebuilds every set from a manifest; throws Io if a digest differs.
std::vector<ReferenceSet> load_reference_manifest(const std::string& json_text);
ReferenceConfig reference_config_from_manifest(const std::string& json_text);
std::string cache_digest(const ReferenceSet& r);

}  // namespace speedrs
