#include "speedrs/signature.hpp"

#include <algorithm>
#include <cmath>

#include "speedrs/error.hpp"

namespace speedrs {
namespace {

std::size_t ipow(std::size_t b, std::size_t e) {
  std::size_t r = 1;
  while (e--) r *= b;
  return r;
}

// out += a (x) b
void add_outer(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  const std::size_t nb = b.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ai = a[i];
    if (ai == 0.0) continue;
    double* row = out.data() + i * nb;
    for (std::size_t j = 0; j < nb; ++j) row[j] += ai * b[j];
  }
}

// Pairwise (cascade) sum of vectors [lo, hi).
void pairwise_sum(const std::vector<std::vector<double>>& v, std::size_t lo, std::size_t hi, std::vector<double>& out) {
  if (hi - lo == 1) {
    out = v[lo];
    return;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  std::vector<double> right;
  pairwise_sum(v, lo, mid, out);
  pairwise_sum(v, mid, hi, right);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += right[i];
}

}  // namespace

TruncatedSig::TruncatedSig(std::size_t dim, std::size_t level) : dim_(dim), level_(level), levels_(level + 1) {
  if (dim == 0) fail(Errc::InvalidArgument, "signature dimension must be >= 1");
  for (std::size_t k = 0; k <= level; ++k) levels_[k].assign(ipow(dim, k), 0.0);
  levels_[0][0] = 1.0;
}

std::size_t TruncatedSig::flat_size(std::size_t dim, std::size_t level) noexcept {
  std::size_t n = 0, p = 1;
  for (std::size_t k = 1; k <= level; ++k) n += (p *= dim);
  return n;
}

std::vector<double> TruncatedSig::flatten() const {
  std::vector<double> out;
  out.reserve(flat_size(dim_, level_));
  for (std::size_t k = 1; k <= level_; ++k) out.insert(out.end(), levels_[k].begin(), levels_[k].end());
  return out;
}

TruncatedSig segment_signature(std::span<const double> increment, std::size_t level) {
  if (level < 1) fail(Errc::InvalidArgument, "truncation level must be >= 1");
  TruncatedSig s(increment.size(), level);
  for (std::size_t k = 1; k <= level; ++k) {
    auto prev = s[k - 1];
    auto cur = s[k];
    const double inv_k = 1.0 / static_cast<double>(k);
    const std::size_t d = increment.size();
    for (std::size_t i = 0; i < prev.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) cur[i * d + j] = prev[i] * increment[j] * inv_k;
  }
  return s;
}

TruncatedSig chen_product(const TruncatedSig& a, const TruncatedSig& b) {
  if (a.dim() != b.dim() || a.level() != b.level())
    fail(Errc::DimMismatch, "chen_product needs equal dimension and level");
  TruncatedSig c(a.dim(), a.level());
  c[0][0] = a[0][0] * b[0][0];
  for (std::size_t k = 1; k <= a.level(); ++k)
    for (std::size_t i = 0; i <= k; ++i) add_outer(a[i], b[k - i], c[k]);
  return c;
}

TruncatedSig signature_truncated(const Path& p, std::size_t level) {
  const std::size_t d = p.dim();
  TruncatedSig s(d, level);
  std::vector<double> inc(d);
  for (std::size_t i = 0; i + 1 < p.length(); ++i) {
    for (std::size_t k = 0; k < d; ++k) inc[k] = p.value(i + 1, k) - p.value(i, k);
    s = chen_product(s, segment_signature(inc, level));
  }
  return s;
}

double sig_inner_product(const TruncatedSig& a, const TruncatedSig& b) {
  if (a.dim() != b.dim() || a.level() != b.level())
    fail(Errc::DimMismatch, "sig_inner_product needs equal dimension and level");
  double total = 0.0;
  for (std::size_t k = 0; k <= a.level(); ++k) {
    double level_sum = 0.0;
    for (std::size_t i = 0; i < a[k].size(); ++i) level_sum += a[k][i] * b[k][i];
    total += level_sum;
  }
  return total;
}

Path kernelize_path(const Path& p) {
  if (!p.time_augmented()) fail(Errc::InvalidArgument, "kernelize_path expects a time-augmented path");
  const std::size_t d = p.dim();
  std::vector<double> v(p.values().begin(), p.values().end());
  for (std::size_t i = 0; i < p.length(); ++i)
    for (std::size_t k = 1; k < d; ++k) v[i * d + k] = std::exp(-v[i * d + k] * v[i * d + k]);
  return Path({p.times().begin(), p.times().end()}, std::move(v), d, true);
}

Path approximator_lift(const Path& raw) {
  if (raw.time_augmented()) fail(Errc::InvalidArgument, "approximator_lift expects a raw (non-augmented) path");
  return kernelize_path(augment_time(normalize_start(raw, 1.0)));
}

std::vector<double> lifted_signature(const Path& raw, std::size_t level) {
  return signature_truncated(approximator_lift(raw), level).flatten();
}

std::vector<double> expected_signature(std::span<const Path> raw_paths, std::size_t level) {
  if (raw_paths.empty()) fail(Errc::EmptyBundle, "expected_signature of an empty bundle");
  const std::size_t d = raw_paths.front().dim();
  std::vector<std::vector<double>> sigs;
  sigs.reserve(raw_paths.size());
  for (const auto& p : raw_paths) {
    if (p.dim() != d) fail(Errc::DimMismatch, "bundle paths have different dimensions");
    sigs.push_back(lifted_signature(p, level));
  }
  std::sort(sigs.begin(), sigs.end());
  std::vector<double> mean;
  pairwise_sum(sigs, 0, sigs.size(), mean);
  const double inv_n = 1.0 / static_cast<double>(sigs.size());
  for (double& m : mean) m *= inv_n;
  return mean;
}

std::vector<double> expected_signature(const PathBundle& bundle, std::size_t level) {
  return expected_signature(std::span<const Path>(bundle.paths), level);
}

std::vector<double> truncate_flat(std::span<const double> flat, std::size_t dim, std::size_t to) {
  const std::size_t n = TruncatedSig::flat_size(dim, to);
  if (n > flat.size()) fail(Errc::DimMismatch, "cannot truncate to a higher level");
  return {flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(n)};
}

}  // namespace speedrs
