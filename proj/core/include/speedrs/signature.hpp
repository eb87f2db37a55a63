#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "speedrs/path.hpp"

namespace speedrs {

/// Signature truncated at level L, stored per level. Level k holds d^k
/// coefficients; the word (i_1, ..., i_k) sits at offset sum_j i_j d^(k-j)
/// (row-major tensor order). Level 0 is the constant 1.
class TruncatedSig {
 public:
  TruncatedSig(std::size_t dim, std::size_t level);  // the identity (1, 0, 0, ...)

  std::size_t dim() const noexcept { return dim_; }
  std::size_t level() const noexcept { return level_; }

  std::span<const double> operator[](std::size_t k) const noexcept { return levels_[k]; }
  std::span<double> operator[](std::size_t k) noexcept { return levels_[k]; }

  /// Levels 1..L concatenated; length d + d^2 + ... + d^L.
  std::vector<double> flatten() const;
  static std::size_t flat_size(std::size_t dim, std::size_t level) noexcept;

 private:
  std::size_t dim_;
  std::size_t level_;
  std::vector<std::vector<double>> levels_;
};

/// Signature of one linear segment: level k is increment^{(x)k} / k!.
TruncatedSig segment_signature(std::span<const double> increment, std::size_t level);

/// Concatenation product: level k = sum_{i+j=k} a_i (x) b_j. Throws DimMismatch.
TruncatedSig chen_product(const TruncatedSig& a, const TruncatedSig& b);

/// Signature of the piecewise-linear interpolant of p.
TruncatedSig signature_truncated(const Path& p, std::size_t level);

/// Sum over all levels (including level 0) of coefficient products.
double sig_inner_product(const TruncatedSig& a, const TruncatedSig& b);

/// Elementwise v -> exp(-v^2) on the value coordinates of a time-augmented
/// path; the time column passes through. Throws InvalidArgument otherwise.
Path kernelize_path(const Path& p);

/// The lift applied before the approximator sees a path:
/// kernelize_path(augment_time(normalize_start(p, 1))).
Path approximator_lift(const Path& raw);

/// Flattened truncated signature of approximator_lift(raw).
std::vector<double> lifted_signature(const Path& raw, std::size_t level);

/// Mean of lifted_signature over the bundle (level 0 dropped), length
/// sum_{k=1..L} (d+1)^k. The per-path vectors are put in lexicographic
/// order before a pairwise sum, which makes the result exactly invariant to
/// the order of paths in the bundle. Throws EmptyBundle / DimMismatch.
std::vector<double> expected_signature(std::span<const Path> raw_paths, std::size_t level);
std::vector<double> expected_signature(const PathBundle& bundle, std::size_t level);

/// Truncates a flattened level-`from` signature of a dim-d path to level `to`
/// (the flat layout makes this a prefix).
std::vector<double> truncate_flat(std::span<const double> flat, std::size_t dim, std::size_t to);

}  // namespace speedrs
