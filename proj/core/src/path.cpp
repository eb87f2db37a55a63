#include "speedrs/path.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "speedrs/error.hpp"
#include "speedrs/rng.hpp"

namespace speedrs {

Path::Path(std::vector<double> times, std::vector<double> values, std::size_t dim, bool time_augmented)
    : times_(std::move(times)), values_(std::move(values)), dim_(dim), time_augmented_(time_augmented) {
  if (dim_ == 0) fail(Errc::InvalidPath, "path dimension must be >= 1");
  if (times_.size() < 2) fail(Errc::InvalidPath, "path needs at least 2 points");
  if (values_.size() != times_.size() * dim_)
    fail(Errc::InvalidPath, "value count does not match length x dim");
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (!std::isfinite(times_[i])) fail(Errc::InvalidPath, "non-finite time stamp");
    if (i > 0 && !(times_[i] > times_[i - 1])) fail(Errc::InvalidPath, "time stamps must be strictly increasing");
  }
  for (double v : values_)
    if (!std::isfinite(v)) fail(Errc::InvalidPath, "non-finite path value");
}

void PathBundle::validate() const {
  if (paths.empty()) fail(Errc::EmptyBundle, "bundle has no paths");
  const std::size_t d = paths.front().dim();
  for (const auto& p : paths)
    if (p.dim() != d) fail(Errc::DimMismatch, "bundle paths have different dimensions");
}

bool PathBundle::uniform_grid() const {
  if (paths.empty()) return true;
  const auto t0 = paths.front().times();
  return std::all_of(paths.begin(), paths.end(), [&](const Path& p) {
    return std::equal(t0.begin(), t0.end(), p.times().begin(), p.times().end());
  });
}

std::vector<double> uniform_times(double horizon, std::size_t n_steps) {
  if (!(horizon > 0.0) || n_steps < 1) fail(Errc::InvalidArgument, "grid needs T > 0 and n_steps >= 1");
  std::vector<double> t(n_steps + 1);
  for (std::size_t i = 0; i <= n_steps; ++i) t[i] = horizon * static_cast<double>(i) / static_cast<double>(n_steps);
  return t;
}

Path augment_time(const Path& p) {
  const std::size_t n = p.length(), d = p.dim();
  std::vector<double> v(n * (d + 1));
  for (std::size_t i = 0; i < n; ++i) {
    v[i * (d + 1)] = p.time(i);
    std::copy_n(p.row(i).begin(), d, v.begin() + static_cast<std::ptrdiff_t>(i * (d + 1) + 1));
  }
  return Path({p.times().begin(), p.times().end()}, std::move(v), d + 1, true);
}

Path normalize_start(const Path& p, double target) {
  const std::size_t n = p.length(), d = p.dim();
  const std::size_t first = p.time_augmented() ? 1 : 0;
  std::vector<double> v(p.values().begin(), p.values().end());
  for (std::size_t k = first; k < d; ++k) {
    const double x0 = p.value(0, k);
    if (x0 == 0.0) fail(Errc::ZeroInitialValue, "coordinate " + std::to_string(k) + " starts at 0");
    if (x0 == target) continue;
    for (std::size_t i = 0; i < n; ++i) v[i * d + k] = v[i * d + k] / x0 * target;
  }
  return Path({p.times().begin(), p.times().end()}, std::move(v), d, p.time_augmented());
}

Path subsample_irregular(const Path& p, std::span<const std::size_t> keep) {
  std::vector<std::size_t> idx(keep.begin(), keep.end());
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  if (idx.size() < 2) fail(Errc::TooFewPoints, "subsample keeps fewer than 2 points");
  if (idx.back() >= p.length()) fail(Errc::IndexOutOfRange, "subsample index past end of path");
  if (idx.front() != 0 || idx.back() != p.length() - 1)
    fail(Errc::InvalidArgument, "subsample must keep the first and last points");
  const std::size_t d = p.dim();
  std::vector<double> t, v;
  t.reserve(idx.size());
  v.reserve(idx.size() * d);
  for (std::size_t i : idx) {
    t.push_back(p.time(i));
    v.insert(v.end(), p.row(i).begin(), p.row(i).end());
  }
  return Path(std::move(t), std::move(v), d, p.time_augmented());
}

std::vector<std::size_t> subsample_indices(std::size_t length, double keep_prob, std::uint64_t seed) {
  if (length < 2) fail(Errc::TooFewPoints, "path too short to subsample");
  if (!(keep_prob >= 0.0 && keep_prob <= 1.0)) fail(Errc::InvalidArgument, "keep probability outside [0,1]");
  Rng rng(seed);
  std::vector<std::size_t> idx{0};
  for (std::size_t i = 1; i + 1 < length; ++i)
    if (rng.uniform() < keep_prob) idx.push_back(i);
  idx.push_back(length - 1);
  return idx;
}

Path subsample_irregular(const Path& p, double keep_prob, std::uint64_t seed) {
  const auto idx = subsample_indices(p.length(), keep_prob, seed);
  return subsample_irregular(p, idx);
}

Path restrict_window(const Path& p, double t) {
  if (t < p.time(1)) fail(Errc::WindowTooShort, "window ends before the second time stamp");
  const std::size_t n = p.length(), d = p.dim();
  if (t >= p.time(n - 1)) return p;
  // First stamp strictly after t.
  const auto ts = p.times();
  const std::size_t hi = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin());
  std::vector<double> times(ts.begin(), ts.begin() + static_cast<std::ptrdiff_t>(hi));
  std::vector<double> v(p.values().begin(), p.values().begin() + static_cast<std::ptrdiff_t>(hi * d));
  if (times.back() < t) {
    const std::size_t lo = hi - 1;
    const double w = (t - p.time(lo)) / (p.time(hi) - p.time(lo));
    times.push_back(t);
    for (std::size_t k = 0; k < d; ++k) v.push_back(p.value(lo, k) + w * (p.value(hi, k) - p.value(lo, k)));
  }
  return Path(std::move(times), std::move(v), d, p.time_augmented());
}

Path select_columns(const Path& p, std::span<const std::size_t> columns) {
  if (columns.empty()) fail(Errc::InvalidArgument, "no columns selected");
  for (std::size_t c : columns)
    if (c >= p.dim()) fail(Errc::IndexOutOfRange, "column " + std::to_string(c) + " out of range");
  const std::size_t n = p.length(), d = columns.size();
  std::vector<double> v(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) v[i * d + k] = p.value(i, columns[k]);
  const bool keeps_time = p.time_augmented() && columns.front() == 0;
  return Path({p.times().begin(), p.times().end()}, std::move(v), d, keeps_time);
}

Path marginal(const Path& p, std::size_t j) {
  if (j >= p.dim()) fail(Errc::IndexOutOfRange, "marginal index " + std::to_string(j) + " out of range");
  const std::size_t cols[] = {j};
  return select_columns(p, cols);
}

double total_variation(const Path& p) {
  double tv = 0.0;
  for (std::size_t i = 0; i + 1 < p.length(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < p.dim(); ++k) {
      const double dx = p.value(i + 1, k) - p.value(i, k);
      s += dx * dx;
    }
    tv += std::sqrt(s);
  }
  return tv;
}

bool path_less(const Path& a, const Path& b) {
  if (a.dim() != b.dim()) return a.dim() < b.dim();
  if (!std::equal(a.times().begin(), a.times().end(), b.times().begin(), b.times().end()))
    return std::lexicographical_compare(a.times().begin(), a.times().end(), b.times().begin(), b.times().end());
  return std::lexicographical_compare(a.values().begin(), a.values().end(), b.values().begin(), b.values().end());
}

}  // namespace speedrs
