#include "speedrs/reference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "speedrs/config.hpp"
#include "speedrs/csv.hpp"
#include "speedrs/error.hpp"
#include "speedrs/parallel.hpp"
#include "speedrs/rng.hpp"
#include "speedrs/signature.hpp"

namespace speedrs {
namespace {

using Json = nlohmann::json;

constexpr std::array<ModelKind, 3> kReferenceClasses{ModelKind::RBergomi, ModelKind::MeanReverting, ModelKind::Gbm};

// Rows = (path, coordinate) pairs, columns = time index. Each row is divided
// by its start value, the same normalization the signature features use.
Eigen::MatrixXd flatten_values(const PathBundle& bundle, std::size_t max_paths) {
  bundle.validate();
  const std::size_t n = std::min(max_paths, bundle.size());
  const std::size_t len = bundle.paths.front().length(), d = bundle.dim();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n * d), static_cast<Eigen::Index>(len));
  for (std::size_t i = 0; i < n; ++i) {
    const Path& p = bundle.paths[i];
    if (p.length() != len)
      fail(Errc::LengthMismatch, "pointwise kernels need paths of one length (" + std::to_string(len) + " vs " +
                                     std::to_string(p.length()) + ")");
    for (std::size_t k = 0; k < d; ++k) {
      const double x0 = p.value(0, k);
      if (x0 == 0.0) fail(Errc::ZeroInitialValue, "coordinate " + std::to_string(k) + " starts at 0");
      for (std::size_t t = 0; t < len; ++t)
        out(static_cast<Eigen::Index>(i * d + k), static_cast<Eigen::Index>(t)) = p.value(t, k) / x0;
    }
  }
  return out;
}

double kernel_sum(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const PointwiseKernel& k) {
  double s = 0.0;
  std::vector<double> ra(static_cast<std::size_t>(a.cols())), rb(static_cast<std::size_t>(b.cols()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    Eigen::Map<Eigen::RowVectorXd>(ra.data(), a.cols()) = a.row(i);
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      Eigen::Map<Eigen::RowVectorXd>(rb.data(), b.cols()) = b.row(j);
      s += k(ra, rb);
    }
  }
  return s;
}

}  // namespace

void ReferenceConfig::validate() const {
  if (level < 1) fail(Errc::InvalidConfig, "reference level must be >= 1");
  if (sig_batch < 2 || sig_batch % 2 != 0) fail(Errc::InvalidConfig, "reference sig_batch must be even and >= 2");
  if (baseline_batch < 1 || baseline_batch > sig_batch)
    fail(Errc::InvalidConfig, "reference baseline_batch must lie in [1, sig_batch]");
  grid.validate();
}

std::array<std::size_t, 3> reference_class_counts(std::size_t n) {
  constexpr std::array<std::size_t, 3> w{2, 2, 1};
  std::array<std::size_t, 3> c{};
  std::array<std::size_t, 3> rem{};
  std::size_t used = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    c[k] = n * w[k] / 5;
    rem[k] = n * w[k] % 5;
    used += c[k];
  }
  // Leftovers go to the largest remainders; ties favour the earlier class.
  while (used < n) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < 3; ++k)
      if (rem[k] > rem[best]) best = k;
    ++c[best];
    rem[best] = 0;
    ++used;
  }
  return c;
}

ReferenceSet make_reference_set(std::size_t id, std::size_t marginal, const ModelSpec& spec, std::uint64_t seed,
                                const ReferenceConfig& cfg) {
  cfg.validate();
  ReferenceSet r;
  r.id = id;
  r.marginal = marginal;
  r.spec = spec;
  r.seed = seed;
  r.sig_batch = cfg.sig_batch;
  const PathBundle b = simulate(spec, cfg.grid, cfg.sig_batch, seed);
  r.exp_sig = expected_signature(b, cfg.level);
  r.samples = flatten_values(b, cfg.baseline_batch);
  return r;
}

std::vector<ReferenceSet> build_reference_sets(std::size_t b_total, std::size_t d, const ReferenceConfig& cfg,
                                               std::uint64_t seed) {
  cfg.validate();
  if (d == 0 || b_total == 0 || b_total % d != 0)
    fail(Errc::IndivisibleCount, std::to_string(b_total) + " reference sets cannot be split evenly over " +
                                     std::to_string(d) + " marginals");
  const std::size_t per = b_total / d;
  const auto counts = reference_class_counts(per);
  struct Plan {
    std::size_t marginal;
    ModelSpec spec;
    std::uint64_t seed;
  };
  std::vector<Plan> plan;
  for (std::size_t j = 0; j < d; ++j) {
    Rng rng(derive_seed(seed, {j, 0}));
    std::size_t p = 0;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t q = 0; q < counts[c]; ++q, ++p)
        plan.push_back({j, sample_params(kReferenceClasses[c], rng, cfg.defaults), derive_seed(seed, {j, p + 1})});
  }
  std::vector<ReferenceSet> refs(plan.size());
  parallel_for(plan.size(), [&](std::size_t i) {
    refs[i] = make_reference_set(i, plan[i].marginal, plan[i].spec, plan[i].seed, cfg);
  });
  return refs;
}

std::vector<double> features_speedrs(const PathBundle& bundle, std::span<const ReferenceSet> refs,
                                     const MmdApproximator& approx) {
  bundle.validate();
  const std::size_t d = bundle.dim();
  std::vector<bool> covered(d, false);
  for (const auto& r : refs) {
    if (r.marginal >= d)
      fail(Errc::DimMismatch, "reference set for marginal " + std::to_string(r.marginal) + " but the bundle has dim " +
                                  std::to_string(d));
    covered[r.marginal] = true;
  }
  if (std::find(covered.begin(), covered.end(), false) != covered.end())
    fail(Errc::DimMismatch, "reference sets do not cover every marginal of the bundle");

  const std::size_t k = approx_sig_size(approx.level);
  std::vector<std::vector<double>> sigs(d);
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<Path> m;
    m.reserve(bundle.size());
    for (const auto& p : bundle.paths) m.push_back(marginal(p, j));
    sigs[j] = expected_signature(m, approx.level);
  }
  std::vector<double> out;
  out.reserve(refs.size());
  for (const auto& r : refs) {
    if (r.exp_sig.size() < k) fail(Errc::DimMismatch, "reference signature shorter than the approximator level");
    const auto ref_sig = truncate_flat(r.exp_sig, 2, approx.level);
    out.push_back(approx_distance(approx, sigs[r.marginal], ref_sig));
  }
  return out;
}

double PointwiseKernel::operator()(std::span<const double> a, std::span<const double> b) const {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  if (kind == Kind::Rbf) return std::exp(-d2 / (2.0 * sigma * sigma));
  const double s = std::sqrt(3.0 * d2) / sigma;
  return (1.0 + s) * std::exp(-s);
}

BaselineForm baseline_form_from_string(const std::string& name) {
  if (name == "as_printed") return BaselineForm::AsPrinted;
  if (name == "standard_biased") return BaselineForm::StandardBiased;
  fail(Errc::InvalidConfig, "unknown baseline form '" + name + "'");
}

const char* to_string(BaselineForm f) noexcept { return f == BaselineForm::AsPrinted ? "as_printed" : "standard_biased"; }

double pointwise_feature(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z, const PointwiseKernel& k,
                         BaselineForm form) {
  if (x.cols() != z.cols())
    fail(Errc::LengthMismatch, "pointwise feature needs equal path lengths (" + std::to_string(x.cols()) + " vs " +
                                   std::to_string(z.cols()) + ")");
  const double nx = static_cast<double>(x.rows()), nz = static_cast<double>(z.rows());
  const double sx = kernel_sum(x, x, k), sz = kernel_sum(z, z, k), sxz = kernel_sum(x, z, k);
  if (form == BaselineForm::AsPrinted) return sx / nx - 2.0 * sxz / (nx * nz) + sz / nz;
  return sx / (nx * nx) - 2.0 * sxz / (nx * nz) + sz / (nz * nz);
}

std::vector<double> features_pointwise(const PathBundle& bundle, std::span<const ReferenceSet> refs,
                                       const PointwiseKernel& k, BaselineForm form, std::size_t max_paths) {
  const Eigen::MatrixXd x = flatten_values(bundle, max_paths);
  std::vector<double> out;
  out.reserve(refs.size());
  for (const auto& r : refs) out.push_back(pointwise_feature(x, r.samples, k, form));
  return out;
}

std::vector<double> Featurizer::operator()(const PathBundle& bundle, std::span<const ReferenceSet> refs) const {
  switch (kind) {
    case Kind::Speedrs:
      if (!approx) fail(Errc::InvalidArgument, "SPEEDRS featurizer without an approximator");
      return features_speedrs(bundle, refs, *approx);
    case Kind::Rbf:
      return features_pointwise(bundle, refs, {PointwiseKernel::Kind::Rbf, sigma}, form, max_paths);
    case Kind::Matern32:
      return features_pointwise(bundle, refs, {PointwiseKernel::Kind::Matern32, sigma}, form, max_paths);
  }
  fail(Errc::InvalidArgument, "unknown featurizer");
}

Featurizer::Kind featurizer_kind_from_string(const std::string& name) {
  if (name == "speedrs") return Featurizer::Kind::Speedrs;
  if (name == "rbf") return Featurizer::Kind::Rbf;
  if (name == "matern32") return Featurizer::Kind::Matern32;
  fail(Errc::InvalidConfig, "unknown model family '" + name + "'");
}

const char* to_string(Featurizer::Kind k) noexcept {
  switch (k) {
    case Featurizer::Kind::Speedrs: return "speedrs";
    case Featurizer::Kind::Rbf: return "rbf";
    case Featurizer::Kind::Matern32: return "matern32";
  }
  return "?";
}

double predict(const Regressor& model, std::span<const ReferenceSet> refs, const Featurizer& f,
               const PathBundle& bundle) {
  return model.predict(f(bundle, refs));
}

void FeatureTable::validate() const {
  const auto n = static_cast<Eigen::Index>(targets.size());
  if (features.rows() != n || specs.size() != targets.size() || seeds.size() != targets.size())
    fail(Errc::ShapeMismatch, "feature table columns have different lengths");
  if (!features.allFinite()) fail(Errc::NumericalOverflow, "feature table holds non-finite entries");
}

Dataset FeatureTable::dataset() const {
  validate();
  Dataset d;
  d.x = features;
  d.y = Eigen::Map<const Eigen::VectorXd>(targets.data(), static_cast<Eigen::Index>(targets.size()));
  return d;
}

FeatureTable FeatureTable::column_block(std::size_t offset, std::size_t count) const {
  if (offset + count > static_cast<std::size_t>(features.cols()))
    fail(Errc::IndexOutOfRange, "feature column block out of range");
  FeatureTable t = *this;
  t.features = features.middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(count));
  return t;
}

void write_feature_csv(const std::string& file, const FeatureTable& t) {
  t.validate();
  std::ofstream out(file, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot open '" + file + "' for writing");
  for (Eigen::Index j = 0; j < t.features.cols(); ++j) out << "ref_" << j << ',';
  out << "target,spec,seed\n";
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (Eigen::Index j = 0; j < t.features.cols(); ++j)
      out << format_double(t.features(static_cast<Eigen::Index>(r), j)) << ',';
    out << format_double(t.targets[r]) << ',' << csv_field(t.specs[r]) << ',' << t.seeds[r] << '\n';
  }
  if (!out) fail(Errc::Io, "failed writing '" + file + "'");
}

FeatureTable read_feature_csv(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot open feature table '" + file + "'");
  const auto header = read_csv_header(in, file);
  if (header.size() < 3 || header[header.size() - 3] != "target" || header.back() != "seed")
    fail(Errc::Io, "'" + file + "' is not a feature table");
  const std::size_t k = header.size() - 3;
  std::vector<std::vector<double>> rows;
  FeatureTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = parse_csv_line(line);
    if (f.size() != header.size()) fail(Errc::Io, "'" + file + "': ragged row " + std::to_string(rows.size() + 1));
    std::vector<double> row(k);
    for (std::size_t j = 0; j < k; ++j) row[j] = parse_double(f[j]);
    rows.push_back(std::move(row));
    t.targets.push_back(parse_double(f[k]));
    t.specs.push_back(f[k + 1]);
    t.seeds.push_back(parse_u64(f[k + 2]));
  }
  t.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(k));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t j = 0; j < k; ++j) t.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = rows[r][j];
  return t;
}

FitResult train_regressor(const FeatureTable& table, std::size_t hidden, Activation act, const TrainConfig& cfg) {
  if (table.rows() == 0) fail(Errc::InvalidArgument, "empty feature table");
  return fit_regressor(table.dataset(), hidden, act, cfg);
}

std::string cache_digest(const ReferenceSet& r) {
  std::string bytes(reinterpret_cast<const char*>(r.exp_sig.data()), r.exp_sig.size() * sizeof(double));
  bytes.append(reinterpret_cast<const char*>(r.samples.data()), static_cast<std::size_t>(r.samples.size()) * sizeof(double));
  return digest_hex(bytes);
}

std::string reference_manifest(std::span<const ReferenceSet> refs, const ReferenceConfig& cfg) {
  Json j;
  j["level"] = cfg.level;
  j["sig_batch"] = cfg.sig_batch;
  j["baseline_batch"] = cfg.baseline_batch;
  j["horizon"] = cfg.grid.horizon;
  j["n_steps"] = cfg.grid.n_steps;
  j["x0"] = cfg.defaults.x0;
  j["sets"] = Json::array();
  for (const auto& r : refs)
    j["sets"].push_back({{"id", r.id},
                         {"marginal", r.marginal},
                         {"spec", Json::parse(r.spec.to_json())},
                         {"seed", r.seed},
                         {"digest", cache_digest(r)}});
  return j.dump(1);
}

ReferenceConfig reference_config_from_manifest(const std::string& json_text) {
  const Json j = Json::parse(json_text);
  ReferenceConfig cfg;
  cfg.level = j.at("level").get<std::size_t>();
  cfg.sig_batch = j.at("sig_batch").get<std::size_t>();
  cfg.baseline_batch = j.at("baseline_batch").get<std::size_t>();
  cfg.grid.horizon = j.at("horizon").get<double>();
  cfg.grid.n_steps = j.at("n_steps").get<std::size_t>();
  cfg.defaults.x0 = j.at("x0").get<double>();
  return cfg;
}

std::vector<ReferenceSet> load_reference_manifest(const std::string& json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::exception& e) {
    fail(Errc::Io, std::string("malformed reference manifest: ") + e.what());
  }
  const ReferenceConfig cfg = reference_config_from_manifest(json_text);
  const auto& sets = j.at("sets");
  std::vector<ReferenceSet> refs(sets.size());
  parallel_for(sets.size(), [&](std::size_t i) {
    const auto& s = sets[i];
    refs[i] = make_reference_set(s.at("id").get<std::size_t>(), s.at("marginal").get<std::size_t>(),
                                 ModelSpec::from_json(s.at("spec").dump()), s.at("seed").get<std::uint64_t>(), cfg);
    if (cache_digest(refs[i]) != s.at("digest").get<std::string>())
      fail(Errc::Io, "reference set " + std::to_string(i) + " does not reproduce its cached digest");
  });
  return refs;
}

}  // namespace speedrs
