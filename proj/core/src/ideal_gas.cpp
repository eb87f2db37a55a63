#include "speedrs/ideal_gas.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "speedrs/error.hpp"
#include "speedrs/rng.hpp"
#include "speedrs/sde.hpp"

namespace speedrs {
namespace {

using Vec3 = std::array<double, 3>;

constexpr int kPlacementAttempts = 2000;

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

class CellGrid {
 public:
  CellGrid(double box, double min_cell) {
    per_dim_ = std::max(1, static_cast<int>(std::floor(box / min_cell)));
    size_ = box / per_dim_;
    cells_.resize(static_cast<std::size_t>(per_dim_) * per_dim_ * per_dim_);
  }

  std::array<int, 3> cell_of(const Vec3& x) const {
    std::array<int, 3> c;
    for (int k = 0; k < 3; ++k) c[k] = std::clamp(static_cast<int>(x[k] / size_), 0, per_dim_ - 1);
    return c;
  }
  std::size_t index(const std::array<int, 3>& c) const {
    return (static_cast<std::size_t>(c[0]) * per_dim_ + c[1]) * per_dim_ + c[2];
  }
  void clear() {
    for (auto& c : cells_) c.clear();
  }
  void insert(std::size_t particle, const Vec3& x) { cells_[index(cell_of(x))].push_back(particle); }

  // Calls fn(j) for every particle in the 27 cells around x.
  template <class Fn>
  void for_neighbours(const Vec3& x, Fn fn) const {
    const auto c = cell_of(x);
    for (int a = std::max(0, c[0] - 1); a <= std::min(per_dim_ - 1, c[0] + 1); ++a)
      for (int b = std::max(0, c[1] - 1); b <= std::min(per_dim_ - 1, c[1] + 1); ++b)
        for (int d = std::max(0, c[2] - 1); d <= std::min(per_dim_ - 1, c[2] + 1); ++d)
          for (std::size_t j : cells_[index({a, b, d})]) fn(j);
  }

 private:
  int per_dim_;
  double size_;
  std::vector<std::vector<std::size_t>> cells_;
};

double kinetic_energy(const std::vector<Vec3>& v) {
  double e = 0.0;
  for (const auto& vi : v) e += 0.5 * dot(vi, vi);
  return e;
}

}  // namespace

GasTrajectory simulate_ideal_gas_full(const IdealGasSpec& spec, const SimGrid& grid, std::uint64_t seed) {
  ModelSpec{spec}.validate();
  grid.validate();
  const std::size_t n = spec.n_particles;
  const double box = std::cbrt(spec.volume);
  const double radius = 0.35 * std::cbrt(spec.volume / static_cast<double>(n));
  const double lo = radius, hi = box - radius;
  const double contact = 2.0 * radius, contact2 = contact * contact;

  Rng rng(seed);
  std::vector<Vec3> x(n), v(n);
  CellGrid cells(box, contact);
  for (std::size_t i = 0; i < n; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      for (int k = 0; k < 3; ++k) x[i][k] = rng.uniform(lo, hi);
      placed = true;
      cells.for_neighbours(x[i], [&](std::size_t j) {
        Vec3 d{x[i][0] - x[j][0], x[i][1] - x[j][1], x[i][2] - x[j][2]};
        if (dot(d, d) < contact2) placed = false;
      });
    }
    if (!placed) fail(Errc::PackingTooDense, "could not place particle " + std::to_string(i) + " without overlap");
    cells.insert(i, x[i]);
  }
  const double vel_sd = std::sqrt(spec.temperature);
  for (auto& vi : v)
    for (auto& c : vi) c = vel_sd * rng.normal();

  GasTrajectory out;
  out.box_length = box;
  out.radius = radius;
  out.initial_speed_sq.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.initial_speed_sq[i] = dot(v[i], v[i]);

  const auto times = grid.times();
  const std::size_t n_samples = times.size();
  std::vector<std::vector<double>> traj(n, std::vector<double>(n_samples * 3));
  auto record = [&](std::size_t s) {
    for (std::size_t i = 0; i < n; ++i)
      for (int k = 0; k < 3; ++k) traj[i][s * 3 + static_cast<std::size_t>(k)] = x[i][k];
    out.kinetic_energy.push_back(kinetic_energy(v));
  };
  record(0);

  for (std::size_t s = 1; s < n_samples; ++s) {
    const double interval = times[s] - times[s - 1];
    double vmax = 0.0;
    for (const auto& vi : v) vmax = std::max(vmax, std::sqrt(dot(vi, vi)));
    // Keep the per-step displacement below a quarter radius.
    const auto substeps = static_cast<std::size_t>(std::max(1.0, std::ceil(interval * vmax / (0.25 * radius))));
    const double h = interval / static_cast<double>(substeps);
    for (std::size_t step = 0; step < substeps; ++step) {
      for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k < 3; ++k) {
          double& p = x[i][k];
          p += v[i][k] * h;
          if (p < lo) {
            p = 2.0 * lo - p;
            v[i][k] = -v[i][k];
          } else if (p > hi) {
            p = 2.0 * hi - p;
            v[i][k] = -v[i][k];
          }
          p = std::clamp(p, lo, hi);
        }
      cells.clear();
      for (std::size_t i = 0; i < n; ++i) cells.insert(i, x[i]);
      for (std::size_t i = 0; i < n; ++i) {
        cells.for_neighbours(x[i], [&](std::size_t j) {
          if (j <= i) return;
          Vec3 d{x[i][0] - x[j][0], x[i][1] - x[j][1], x[i][2] - x[j][2]};
          const double dist2 = dot(d, d);
          if (dist2 >= contact2 || dist2 == 0.0) return;
          Vec3 dv{v[i][0] - v[j][0], v[i][1] - v[j][1], v[i][2] - v[j][2]};
          const double approach = dot(dv, d);
          if (approach >= 0.0) return;
          const double f = approach / dist2;
          for (int k = 0; k < 3; ++k) {
            v[i][k] -= f * d[k];
            v[j][k] += f * d[k];
          }
        });
      }
    }
    record(s);
  }

  out.positions.paths.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.positions.paths.emplace_back(times, std::move(traj[i]), 3);
  out.positions.model_id = ModelSpec{spec}.to_json();
  out.positions.seed = seed;
  return out;
}

PathBundle simulate_ideal_gas(const IdealGasSpec& spec, const SimGrid& grid, std::uint64_t seed) {
  return simulate_ideal_gas_full(spec, grid, seed).positions;
}

}  // namespace speedrs
