#pragma once

#include <span>
#include <vector>

namespace speedrs {

double mean(std::span<const double> x);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_sd(std::span<const double> x);
/// Ranks starting at 1; ties get their average rank.
std::vector<double> average_ranks(std::span<const double> x);
double pearson(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of average ranks. Throws LengthMismatch.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace speedrs
