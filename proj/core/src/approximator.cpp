#include "speedrs/approximator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "speedrs/csv.hpp"
#include "speedrs/error.hpp"
#include "speedrs/parallel.hpp"
#include "speedrs/rng.hpp"
#include "speedrs/signature.hpp"

namespace speedrs {
namespace {

using Json = nlohmann::json;

// The lifted 1-d path has a time column and one value column.
constexpr std::size_t kLiftDim = 2;

ModelKind draw_kind(const std::vector<ModelKind>& kinds, Rng& rng) {
  return kinds[static_cast<std::size_t>(rng.next_u64() % kinds.size())];
}

std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

void CorpusConfig::validate() const {
  if (n_rows < 10) fail(Errc::InvalidConfig, "corpus needs at least 10 rows");
  if (!(zero_fraction >= 0.0 && zero_fraction < 1.0)) fail(Errc::InvalidConfig, "zero_fraction must lie in [0, 1)");
  if (batch < 2 || batch % 2 != 0) fail(Errc::InvalidConfig, "corpus batch must be even and >= 2");
  if (level < 1) fail(Errc::InvalidConfig, "corpus level must be >= 1");
  if (kinds.empty()) fail(Errc::InvalidConfig, "corpus needs at least one model class");
  grid.validate();
}

std::size_t approx_sig_size(std::size_t level) { return TruncatedSig::flat_size(kLiftDim, level); }

std::size_t default_approx_width(std::size_t level) {
  switch (level) {
    case 2: return 25;
    case 3: return 60;
    case 4: return 90;
    default: return 60;
  }
}

MmdRow make_mmd_row(const CorpusConfig& cfg, std::uint64_t row_seed, bool zero_row) {
  Rng rng(derive_seed(row_seed, 0));
  const ModelSpec a = sample_params(draw_kind(cfg.kinds, rng), rng);
  const ModelSpec b = zero_row ? a : sample_params(draw_kind(cfg.kinds, rng), rng);
  const PathBundle xa = simulate(a, cfg.grid, cfg.batch, derive_seed(row_seed, 1));
  const PathBundle xb = simulate(b, cfg.grid, cfg.batch, derive_seed(row_seed, 2));

  MmdRow row;
  row.feature = concat(expected_signature(xa, cfg.level), expected_signature(xb, cfg.level));
  row.spec_a = a.to_json();
  row.spec_b = b.to_json();
  row.seed = row_seed;
  if (!zero_row) {
    const auto ia = kernel_inputs(xa), ib = kernel_inputs(xb);
    row.target = std::max(0.0, mmd2_unbiased(ia, ib, cfg.oracle));
  }
  return row;
}

std::vector<MmdRow> build_mmd_dataset(const CorpusConfig& cfg) {
  cfg.validate();
  const auto n_zero = static_cast<std::size_t>(std::llround(cfg.zero_fraction * static_cast<double>(cfg.n_rows)));
  std::vector<MmdRow> rows(cfg.n_rows);
  parallel_for(cfg.n_rows, [&](std::size_t i) {
    rows[i] = make_mmd_row(cfg, derive_seed(cfg.seed, i), i >= cfg.n_rows - n_zero);
  });
  return rows;
}

std::size_t corpus_level(const MmdRow& row) {
  const std::size_t half = row.feature.size() / 2;
  for (std::size_t l = 1; l <= 12 && approx_sig_size(l) <= half; ++l)
    if (approx_sig_size(l) == half && row.feature.size() == 2 * half) return l;
  fail(Errc::DimMismatch, "corpus feature length " + std::to_string(row.feature.size()) + " matches no level");
}

std::vector<double> project_feature(std::span<const double> feature, std::size_t level) {
  const std::size_t half = feature.size() / 2;
  const std::size_t k = approx_sig_size(level);
  if (k > half || feature.size() != 2 * half) fail(Errc::DimMismatch, "cannot project corpus feature to this level");
  return concat(truncate_flat(feature.first(half), kLiftDim, level), truncate_flat(feature.subspan(half), kLiftDim, level));
}

ApproximatorFit train_approximator(std::span<const MmdRow> rows, std::size_t level, std::size_t hidden,
                                   const TrainConfig& cfg) {
  if (rows.size() < 2) fail(Errc::InvalidArgument, "approximator needs at least 2 rows");
  const std::size_t k = 2 * approx_sig_size(level);
  Dataset data;
  data.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(k));
  data.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto f = project_feature(rows[r].feature, level);
    data.x.row(static_cast<Eigen::Index>(r)) = Eigen::Map<const Eigen::RowVectorXd>(f.data(), static_cast<Eigen::Index>(k));
    data.y(static_cast<Eigen::Index>(r)) = rows[r].target;
  }
  FitResult fit = fit_regressor(data, hidden, Activation::Relu, cfg);
  ApproximatorFit out;
  out.model.reg = std::move(fit.model);
  out.model.level = level;
  out.model.reg.metadata = Json{{"kind", "mmd-approximator"}, {"level", level}, {"symmetrize", true}, {"clamp", true}}.dump();
  out.history = std::move(fit.history);
  out.train_mse = fit.train_mse;
  out.valid_mse = fit.valid_mse;
  return out;
}

double approx_distance(const MmdApproximator& m, std::span<const double> sig_a, std::span<const double> sig_b) {
  const std::size_t k = approx_sig_size(m.level);
  if (sig_a.size() != k || sig_b.size() != k)
    fail(Errc::DimMismatch, "approximator expects expected signatures of length " + std::to_string(k));
  double d = m.reg.predict(concat(sig_a, sig_b));
  if (m.symmetrize) d = 0.5 * (d + m.reg.predict(concat(sig_b, sig_a)));
  return m.clamp ? std::max(0.0, d) : d;
}

double metric_diagnostics(const MmdApproximator& m, const DiagnosticsConfig& cfg) {
  if (cfg.n_tests == 0) return 0.0;
  std::vector<std::uint8_t> pass(cfg.n_tests, 0);
  parallel_for(cfg.n_tests, [&](std::size_t t) {
    const std::uint64_t s = derive_seed(cfg.seed, t);
    Rng rng(derive_seed(s, 0));
    const ModelSpec spec = sample_params(draw_kind(cfg.kinds, rng), rng);
    const auto a = expected_signature(simulate(spec, cfg.grid, cfg.batch, derive_seed(s, 1)), m.level);
    const auto b = expected_signature(simulate(spec, cfg.grid, cfg.batch, derive_seed(s, 2)), m.level);
    pass[t] = approx_distance(m, a, b) < cfg.threshold ? 1 : 0;
  });
  std::size_t ok = 0;
  for (auto p : pass) ok += p;
  return static_cast<double>(ok) / static_cast<double>(cfg.n_tests);
}

void save_approximator(const std::string& file, const MmdApproximator& m) {
  MmdApproximator copy = m;
  copy.reg.metadata =
      Json{{"kind", "mmd-approximator"}, {"level", m.level}, {"symmetrize", m.symmetrize}, {"clamp", m.clamp}}.dump();
  save_regressor(file, copy.reg);
}

MmdApproximator load_approximator(const std::string& file) {
  MmdApproximator m;
  m.reg = load_regressor(file);
  const Json meta = Json::parse(m.reg.metadata);
  if (meta.value("kind", "") != "mmd-approximator") fail(Errc::Io, "'" + file + "' is not an MMD approximator");
  m.level = meta.at("level").get<std::size_t>();
  m.symmetrize = meta.value("symmetrize", true);
  m.clamp = meta.value("clamp", true);
  if (m.reg.net.spec().input_dim != 2 * approx_sig_size(m.level))
    fail(Errc::Io, "approximator '" + file + "' has inconsistent input width");
  return m;
}

void write_corpus_csv(const std::string& file, std::span<const MmdRow> rows) {
  if (rows.empty()) fail(Errc::InvalidArgument, "refusing to write an empty corpus");
  std::ofstream out(file, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot open '" + file + "' for writing");
  const std::size_t k = rows.front().feature.size();
  for (std::size_t j = 0; j < k; ++j) out << "f_" << j << ',';
  out << "target,spec_a,spec_b,seed\n";
  for (const auto& r : rows) {
    if (r.feature.size() != k) fail(Errc::ShapeMismatch, "corpus rows differ in feature length");
    for (double v : r.feature) out << format_double(v) << ',';
    out << format_double(r.target) << ',' << csv_field(r.spec_a) << ',' << csv_field(r.spec_b) << ',' << r.seed << '\n';
  }
  if (!out) fail(Errc::Io, "failed writing '" + file + "'");
}

std::vector<MmdRow> read_corpus_csv(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot open corpus '" + file + "'");
  const auto header = read_csv_header(in, file);
  if (header.size() < 5 || header[header.size() - 4] != "target" || header.back() != "seed")
    fail(Errc::Io, "'" + file + "' is not a distance corpus");
  const std::size_t k = header.size() - 4;
  std::vector<MmdRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = parse_csv_line(line);
    if (f.size() != header.size()) fail(Errc::Io, "'" + file + "': ragged row " + std::to_string(rows.size() + 1));
    MmdRow r;
    for (std::size_t j = 0; j < k; ++j) r.feature.push_back(parse_double(f[j]));
    r.target = parse_double(f[k]);
    r.spec_a = f[k + 1];
    r.spec_b = f[k + 2];
    r.seed = parse_u64(f[k + 3]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace speedrs
