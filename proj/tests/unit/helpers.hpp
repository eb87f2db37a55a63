#pragma once

#include <cmath>
#include <vector>

#include "speedrs/path.hpp"
#include "speedrs/rng.hpp"

namespace testing {

// Random walk with `length` stamps on [0, horizon] and N(0, step^2) increments.
inline speedrs::Path random_path(std::size_t length, std::size_t dim, double step, std::uint64_t seed,
                                 double horizon = 1.0) {
  speedrs::Rng rng(seed);
  std::vector<double> values(length * dim);
  for (std::size_t i = 1; i < length; ++i)
    for (std::size_t k = 0; k < dim; ++k) values[i * dim + k] = values[(i - 1) * dim + k] + step * rng.normal();
  return speedrs::Path(speedrs::uniform_times(horizon, length - 1), std::move(values), dim);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace testing
