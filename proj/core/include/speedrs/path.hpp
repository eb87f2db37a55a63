#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace speedrs {

/// A discretely observed path: strictly increasing time stamps and a
/// row-major (length x dim) value matrix. Between stamps the path is the
/// piecewise-linear interpolant.
///
/// A path produced by augment_time() remembers that its first value column is
/// the time coordinate; normalize_start() and kernelize_path() leave that
/// column alone.
class Path {
 public:
  Path() = default;
  // Throws Error(InvalidPath) unless: length >= 2, values.size() == length*dim,
  // dim >= 1, times strictly increasing and everything finite.
  Path(std::vector<double> times, std::vector<double> values, std::size_t dim,
       bool time_augmented = false);

  std::size_t length() const noexcept { return times_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  bool time_augmented() const noexcept { return time_augmented_; }

  std::span<const double> times() const noexcept { return times_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {values_.data() + i * dim_, dim_};
  }
  double time(std::size_t i) const noexcept { return times_[i]; }
  double value(std::size_t i, std::size_t k) const noexcept { return values_[i * dim_ + k]; }

  friend bool operator==(const Path&, const Path&) = default;

 private:
  std::vector<double> times_;
  std::vector<double> values_;
  std::size_t dim_ = 0;
  bool time_augmented_ = false;
};

/// An empirical sample of one stochastic process.
struct PathBundle {
  std::vector<Path> paths;
  std::string model_id;  // compact ModelSpec JSON, or empty
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return paths.size(); }
  std::size_t dim() const noexcept { return paths.empty() ? 0 : paths.front().dim(); }
  // Throws EmptyBundle / DimMismatch.
  void validate() const;
  // True when every path has the same time grid.
  bool uniform_grid() const;
};

/// Equidistant grid t_i = i*T/n_steps, i = 0..n_steps.
std::vector<double> uniform_times(double horizon, std::size_t n_steps);

/// Prepends time as coordinate 0. Applying it twice adds two time columns.
Path augment_time(const Path& p);

/// Divides every value coordinate by its initial value and scales by target.
/// The time column of an augmented path is untouched. Throws ZeroInitialValue.
Path normalize_start(const Path& p, double target);

/// Keeps the listed rows (sorted and deduplicated); must contain 0 and the
/// last index. Throws TooFewPoints / IndexOutOfRange.
Path subsample_irregular(const Path& p, std::span<const std::size_t> keep);

/// Keeps each interior row independently with probability keep_prob; the
/// endpoints are always kept. Deterministic in (seed).
Path subsample_irregular(const Path& p, double keep_prob, std::uint64_t seed);

/// Row indices selected by the probabilistic overload above.
std::vector<std::size_t> subsample_indices(std::size_t length, double keep_prob, std::uint64_t seed);

/// The path on [t0, t]. If t falls strictly inside a segment, the linearly
/// interpolated point at t is appended. Throws WindowTooShort if t is before
/// the second stamp.
Path restrict_window(const Path& p, double t);

/// One-dimensional path made of value column j. Throws IndexOutOfRange.
Path marginal(const Path& p, std::size_t j);

/// Path made of the given value columns, in order.
Path select_columns(const Path& p, std::span<const std::size_t> columns);

/// Total variation sum_i |x_{i+1} - x_i|_2 over all value coordinates.
double total_variation(const Path& p);

/// Lexicographic order on (times, values); used to put bundles in a canonical
/// order so that order-dependent floating-point reductions become exact
/// permutation invariants.
bool path_less(const Path& a, const Path& b);

}  // namespace speedrs
