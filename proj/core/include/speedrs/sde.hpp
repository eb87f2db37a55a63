#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "speedrs/model_spec.hpp"
#include "speedrs/path.hpp"

namespace speedrs {

/// [0, T] split into n_steps equal steps (n_steps + 1 stamps).
struct SimGrid {
  double horizon = 1.0;
  std::size_t n_steps = 14;

  double dt() const { return horizon / static_cast<double>(n_steps); }
  std::vector<double> times() const { return uniform_times(horizon, n_steps); }
  void validate() const;
};

// Every simulator derives one RNG stream per path (per antithetic pair for
// rBergomi) from (seed, path index), so results do not depend on threading.

/// Euler-Maruyama: S_i = S_{i-1} + mu S_{i-1} dt + sigma sqrt(dt) S_{i-1} Z.
PathBundle simulate_gbm(const GbmSpec& spec, const SimGrid& grid, std::size_t n_paths, std::uint64_t seed);

/// As GBM with the diffusion term sigma sqrt(dt) max(S, 0)^gamma Z; gamma = 1
/// reproduces simulate_gbm exactly under the same seed.
PathBundle simulate_cev(const CevSpec& spec, const SimGrid& grid, std::size_t n_paths, std::uint64_t seed);

struct MeanRevertingPaths {
  PathBundle price;
  PathBundle variance;
};

/// Price then variance update with correlated normals; the square roots
/// use max(v, 0). Only the price is emitted by simulate_mean_reverting.
MeanRevertingPaths simulate_mean_reverting_full(const MeanRevertingSpec& spec, const SimGrid& grid,
                                                std::size_t n_paths, std::uint64_t seed);
PathBundle simulate_mean_reverting(const MeanRevertingSpec& spec, const SimGrid& grid, std::size_t n_paths,
                                   std::uint64_t seed);

/// Lag at which g(u) = u^(H - 1/2) matches the cell average of g^2 over the
/// k-th cell behind the evaluation time (k >= 1).
double moment_matching_lag(double hurst, std::size_t k, double dt);
/// g evaluated at the moment-matching lags, k = 1..n_steps.
std::vector<double> rbergomi_kernel_weights(double hurst, std::size_t n_steps, double dt);

/// Driving normals of one antithetic pair. vol[0] = zeta, vol[1] = -zeta;
/// price[p] = rho * vol[p] + sqrt(1 - rho^2) * xi.
struct RBergomiPairNoise {
  std::vector<double> vol[2];
  std::vector<double> price[2];
};
RBergomiPairNoise rbergomi_pair_noise(double rho, std::size_t n_steps, std::uint64_t pair_seed);

struct RBergomiPaths {
  PathBundle price;
  PathBundle variance;
  PathBundle log_price;
};

/// Rough Bergomi by discrete convolution with moment-matched kernel weights
/// and antithetic pairs (paths 2p, 2p+1). Throws OddPathCount.
RBergomiPaths simulate_rbergomi_full(const RBergomiSpec& spec, const SimGrid& grid, std::size_t n_paths,
                                     std::uint64_t seed);
PathBundle simulate_rbergomi(const RBergomiSpec& spec, const SimGrid& grid, std::size_t n_paths, std::uint64_t seed);

/// alpha * a + (1 - alpha) * b, path by path. Throws ShapeMismatch.
PathBundle mixture_paths(double alpha, const PathBundle& a, const PathBundle& b);

/// Dispatches on the model kind. Mixtures simulate both components from
/// derived seeds. The ideal gas ignores n_paths (one path per particle).
PathBundle simulate(const ModelSpec& spec, const SimGrid& grid, std::size_t n_paths, std::uint64_t seed);

/// Mean of max(x_T - K, 0) * 1{min_i x_i <= B} over a 1-d bundle; the
/// minimum runs over the whole grid, x0 included. No discounting.
double price_barrier_mc(const PathBundle& bundle, double strike, double barrier);

/// Monte Carlo barrier price computed in fixed-size chunks without holding
/// all paths in memory. Deterministic in (spec, grid, n_paths, seed).
struct McPrice {
  double price = 0.0;
  double std_error = 0.0;
};
McPrice price_barrier_model(const ModelSpec& spec, const SimGrid& grid, std::size_t n_paths, std::uint64_t seed,
                            double strike, double barrier);

/// price_barrier_model of make_mixture(alpha, left, right) for every alpha,
/// sharing the component simulations. Matches the single-model call exactly.
std::vector<McPrice> price_barrier_mixtures(std::span<const double> alphas, const ModelSpec& left,
                                            const ModelSpec& right, const SimGrid& grid, std::size_t n_paths,
                                            std::uint64_t seed, double strike, double barrier);

}  // namespace speedrs
