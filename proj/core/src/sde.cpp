#include "speedrs/sde.hpp"

#include <algorithm>
#include <cmath>

#include "speedrs/error.hpp"
#include "speedrs/ideal_gas.hpp"
#include "speedrs/parallel.hpp"
#include "speedrs/rng.hpp"

namespace speedrs {
namespace {

PathBundle make_bundle(std::size_t n_paths, const std::string& model_id, std::uint64_t seed) {
  PathBundle b;
  b.paths.resize(n_paths);
  b.model_id = model_id;
  b.seed = seed;
  return b;
}

template <class StepFn>
PathBundle euler_bundle(const SimGrid& grid, std::size_t n_paths, std::uint64_t seed, double x0,
                        const std::string& model_id, StepFn step) {
  grid.validate();
  const auto times = grid.times();
  auto bundle = make_bundle(n_paths, model_id, seed);
  parallel_for(n_paths, [&](std::size_t p) {
    Rng rng(derive_seed(seed, p));
    std::vector<double> v(grid.n_steps + 1);
    v[0] = x0;
    for (std::size_t i = 1; i <= grid.n_steps; ++i) v[i] = step(v[i - 1], rng.normal());
    bundle.paths[p] = Path(times, std::move(v), 1);
  });
  return bundle;
}

}  // namespace

void SimGrid::validate() const {
  if (!(horizon > 0.0) || n_steps < 1) fail(Errc::InvalidArgument, "grid needs T > 0 and n_steps >= 1");
}

PathBundle simulate_gbm(const GbmSpec& spec, const SimGrid& grid, std::size_t n_paths, std::uint64_t seed) {
  ModelSpec{spec}.validate();
  const double dt = grid.dt(), sd = spec.sigma * std::sqrt(dt);
  return euler_bundle(grid, n_paths, seed, spec.x0, ModelSpec{spec}.to_json(),
                      [&](double s, double z) { return s + spec.mu * s * dt + sd * s * z; });
}

PathBundle simulate_cev(const CevSpec& spec, const SimGrid& grid, std::size_t n_paths, std::uint64_t seed) {
  ModelSpec{spec}.validate();
  const double dt = grid.dt(), sd = spec.sigma * std::sqrt(dt);
  return euler_bundle(grid, n_paths, seed, spec.x0, ModelSpec{spec}.to_json(), [&](double s, double z) {
    const double level = spec.gamma == 1.0 ? s : std::pow(std::max(s, 0.0), spec.gamma);
    return s + spec.mu * s * dt + sd * level * z;
  });
}

MeanRevertingPaths simulate_mean_reverting_full(const MeanRevertingSpec& spec, const SimGrid& grid,
                                                std::size_t n_paths, std::uint64_t seed) {
  ModelSpec{spec}.validate();
  grid.validate();
  const auto times = grid.times();
  const double dt = grid.dt(), sqdt = std::sqrt(dt);
  const double rho_perp = std::sqrt(std::max(0.0, 1.0 - spec.rho * spec.rho));
  MeanRevertingPaths out{make_bundle(n_paths, ModelSpec{spec}.to_json(), seed),
                         make_bundle(n_paths, ModelSpec{spec}.to_json(), seed)};
  parallel_for(n_paths, [&](std::size_t p) {
    Rng rng(derive_seed(seed, p));
    std::vector<double> s(grid.n_steps + 1), v(grid.n_steps + 1);
    s[0] = spec.x0;
    v[0] = spec.v0;
    for (std::size_t i = 1; i <= grid.n_steps; ++i) {
      const double zs = rng.normal(), zv = rng.normal();
      const double root_v = std::sqrt(std::max(v[i - 1], 0.0));
      s[i] = s[i - 1] + spec.mu * s[i - 1] * dt + root_v * sqdt * s[i - 1] * zs;
      v[i] = v[i - 1] + spec.kappa * (spec.theta - v[i - 1]) * dt + spec.xi * sqdt * root_v * (spec.rho * zs + rho_perp * zv);
    }
    out.price.paths[p] = Path(times, std::move(s), 1);
    out.variance.paths[p] = Path(times, std::move(v), 1);
  });
  return out;
}

PathBundle simulate_mean_reverting(const MeanRevertingSpec& spec, const SimGrid& grid, std::size_t n_paths,
                                   std::uint64_t seed) {
  return simulate_mean_reverting_full(spec, grid, n_paths, seed).price;
}

double moment_matching_lag(double hurst, std::size_t k, double dt) {
  const double a = 2.0 * hurst;
  const double avg = (std::pow(static_cast<double>(k) * dt, a) - std::pow(static_cast<double>(k - 1) * dt, a)) / (a * dt);
  return std::pow(avg, 1.0 / (a - 1.0));
}

std::vector<double> rbergomi_kernel_weights(double hurst, std::size_t n_steps, double dt) {
  std::vector<double> g(n_steps);
  for (std::size_t k = 1; k <= n_steps; ++k) g[k - 1] = std::pow(moment_matching_lag(hurst, k, dt), hurst - 0.5);
  return g;
}

RBergomiPairNoise rbergomi_pair_noise(double rho, std::size_t n_steps, std::uint64_t pair_seed) {
  Rng rng(pair_seed);
  std::vector<double> zeta(n_steps), xi(n_steps);
  for (auto& z : zeta) z = rng.normal();
  for (auto& z : xi) z = rng.normal();
  const double rho_perp = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  RBergomiPairNoise noise;
  for (int p = 0; p < 2; ++p) {
    noise.vol[p].resize(n_steps);
    noise.price[p].resize(n_steps);
    for (std::size_t i = 0; i < n_steps; ++i) {
      noise.vol[p][i] = p == 0 ? zeta[i] : -zeta[i];
      noise.price[p][i] = rho * noise.vol[p][i] + rho_perp * xi[i];
    }
  }
  return noise;
}

RBergomiPaths simulate_rbergomi_full(const RBergomiSpec& spec, const SimGrid& grid, std::size_t n_paths,
                                     std::uint64_t seed) {
  ModelSpec{spec}.validate();
  grid.validate();
  if (n_paths % 2 != 0) fail(Errc::OddPathCount, "rBergomi antithetic sampling needs an even path count");
  const auto times = grid.times();
  const std::size_t n = grid.n_steps;
  const double dt = grid.dt(), sqdt = std::sqrt(dt);
  const auto g = rbergomi_kernel_weights(spec.hurst, n, dt);
  const double eta = 2.0 * spec.nu * std::sqrt(2.0 * spec.hurst);
  // Compensator exp(-4 nu^2 H int_0^t (t-s)^{2H-1} ds) = exp(-2 nu^2 t^{2H}).
  std::vector<double> compensator(n + 1);
  for (std::size_t i = 0; i <= n; ++i)
    compensator[i] = std::exp(-2.0 * spec.nu * spec.nu * std::pow(times[i], 2.0 * spec.hurst));

  const std::string id = ModelSpec{spec}.to_json();
  RBergomiPaths out{make_bundle(n_paths, id, seed), make_bundle(n_paths, id, seed), make_bundle(n_paths, id, seed)};
  parallel_for(n_paths / 2, [&](std::size_t pair) {
    const auto noise = rbergomi_pair_noise(spec.rho, n, derive_seed(seed, pair));
    for (int member = 0; member < 2; ++member) {
      const auto& zv = noise.vol[member];
      const auto& zs = noise.price[member];
      std::vector<double> var(n + 1), logp(n + 1), price(n + 1);
      for (std::size_t i = 0; i <= n; ++i) {
        double phi = 0.0;
        for (std::size_t l = 1; l <= i; ++l) phi += g[i - l] * zv[l - 1];
        phi *= sqdt;
        var[i] = spec.xi0 * std::exp(eta * phi) * compensator[i];
      }
      logp[0] = std::log(spec.x0);
      for (std::size_t i = 1; i <= n; ++i)
        logp[i] = logp[i - 1] - 0.5 * dt * var[i - 1] + sqdt * std::sqrt(var[i - 1]) * zs[i - 1];
      for (std::size_t i = 0; i <= n; ++i) price[i] = std::exp(logp[i]);
      const std::size_t p = 2 * pair + static_cast<std::size_t>(member);
      out.price.paths[p] = Path(times, std::move(price), 1);
      out.variance.paths[p] = Path(times, std::move(var), 1);
      out.log_price.paths[p] = Path(times, std::move(logp), 1);
    }
  });
  return out;
}

PathBundle simulate_rbergomi(const RBergomiSpec& spec, const SimGrid& grid, std::size_t n_paths, std::uint64_t seed) {
  return simulate_rbergomi_full(spec, grid, n_paths, seed).price;
}

PathBundle mixture_paths(double alpha, const PathBundle& a, const PathBundle& b) {
  if (a.size() != b.size()) fail(Errc::ShapeMismatch, "mixture bundles differ in size");
  PathBundle out;
  out.seed = a.seed;
  out.paths.reserve(a.size());
  for (std::size_t p = 0; p < a.size(); ++p) {
    const Path& x = a.paths[p];
    const Path& y = b.paths[p];
    if (x.length() != y.length() || x.dim() != y.dim() ||
        !std::equal(x.times().begin(), x.times().end(), y.times().begin()))
      fail(Errc::ShapeMismatch, "mixture paths differ in shape or grid");
    std::vector<double> v(x.values().size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = alpha * x.values()[i] + (1.0 - alpha) * y.values()[i];
    out.paths.emplace_back(std::vector<double>(x.times().begin(), x.times().end()), std::move(v), x.dim());
  }
  return out;
}

PathBundle simulate(const ModelSpec& spec, const SimGrid& grid, std::size_t n_paths, std::uint64_t seed) {
  spec.validate();
  PathBundle b = std::visit(
      [&](const auto& p) -> PathBundle {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GbmSpec>) {
          return simulate_gbm(p, grid, n_paths, seed);
        } else if constexpr (std::is_same_v<T, CevSpec>) {
          return simulate_cev(p, grid, n_paths, seed);
        } else if constexpr (std::is_same_v<T, MeanRevertingSpec>) {
          return simulate_mean_reverting(p, grid, n_paths, seed);
        } else if constexpr (std::is_same_v<T, RBergomiSpec>) {
          return simulate_rbergomi(p, grid, n_paths, seed);
        } else if constexpr (std::is_same_v<T, MixtureSpec>) {
          const auto left = simulate(*p.left, grid, n_paths, derive_seed(seed, 1));
          const auto right = simulate(*p.right, grid, n_paths, derive_seed(seed, 2));
          return mixture_paths(p.alpha, left, right);
        } else {
          return simulate_ideal_gas(p, grid, seed);
        }
      },
      spec.params);
  b.model_id = spec.to_json();
  b.seed = seed;
  return b;
}

double price_barrier_mc(const PathBundle& bundle, double strike, double barrier) {
  bundle.validate();
  if (bundle.dim() != 1) fail(Errc::DimMismatch, "barrier pricing needs a 1-d bundle");
  double total = 0.0;
  for (const auto& p : bundle.paths) {
    const auto v = p.values();
    const double running_min = *std::min_element(v.begin(), v.end());
    if (running_min <= barrier) total += std::max(v.back() - strike, 0.0);
  }
  return total / static_cast<double>(bundle.size());
}

namespace {

constexpr std::size_t kMcChunk = 2000;

struct PayoffSums {
  double s = 0.0, s2 = 0.0;
  std::size_t n = 0;
  void add(const PathBundle& bundle, double strike, double barrier) {
    for (const auto& p : bundle.paths) {
      const auto v = p.values();
      const double running_min = *std::min_element(v.begin(), v.end());
      const double payoff = running_min <= barrier ? std::max(v.back() - strike, 0.0) : 0.0;
      s += payoff;
      s2 += payoff * payoff;
    }
    n += bundle.size();
  }
  McPrice finish() const {
    const double nd = static_cast<double>(n);
    McPrice r;
    r.price = s / nd;
    const double var = std::max(0.0, (s2 / nd - r.price * r.price) * nd / (nd - 1.0));
    r.std_error = std::sqrt(var / nd);
    return r;
  }
};

std::size_t chunk_size(std::size_t n_paths, std::size_t c) {
  const std::size_t count = std::min(kMcChunk, n_paths - c * kMcChunk);
  return count + count % 2;  // antithetic pairs
}

}  // namespace

McPrice price_barrier_model(const ModelSpec& spec, const SimGrid& grid, std::size_t n_paths, std::uint64_t seed,
                            double strike, double barrier) {
  if (n_paths < 2) fail(Errc::TooFewSamples, "Monte Carlo price needs at least 2 paths");
  const std::size_t chunks = (n_paths + kMcChunk - 1) / kMcChunk;
  PayoffSums acc;
  for (std::size_t c = 0; c < chunks; ++c)
    acc.add(simulate(spec, grid, chunk_size(n_paths, c), derive_seed(seed, c)), strike, barrier);
  return acc.finish();
}

std::vector<McPrice> price_barrier_mixtures(std::span<const double> alphas, const ModelSpec& left,
                                            const ModelSpec& right, const SimGrid& grid, std::size_t n_paths,
                                            std::uint64_t seed, double strike, double barrier) {
  if (n_paths < 2) fail(Errc::TooFewSamples, "Monte Carlo price needs at least 2 paths");
  for (double a : alphas) make_mixture(a, left, right).validate();
  const std::size_t chunks = (n_paths + kMcChunk - 1) / kMcChunk;
  std::vector<PayoffSums> acc(alphas.size());
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::uint64_t cs = derive_seed(seed, c);
    const auto l = simulate(left, grid, chunk_size(n_paths, c), derive_seed(cs, 1));
    const auto r = simulate(right, grid, chunk_size(n_paths, c), derive_seed(cs, 2));
    for (std::size_t k = 0; k < alphas.size(); ++k) acc[k].add(mixture_paths(alphas[k], l, r), strike, barrier);
  }
  std::vector<McPrice> out;
  for (const auto& a : acc) out.push_back(a.finish());
  return out;
}

}  // namespace speedrs
