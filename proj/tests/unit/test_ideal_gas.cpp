#include <doctest.h>

#include <cmath>

#include "speedrs/error.hpp"
#include "speedrs/ideal_gas.hpp"
#include "speedrs/model_spec.hpp"
#include "speedrs/sde.hpp"
#include "speedrs/stats.hpp"

using namespace speedrs;

TEST_SUITE("ideal_gas") {
  TEST_CASE("initial speeds scale with temperature") {
    const SimGrid grid{1.0, 19};
    std::vector<double> cold, hot;
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto a = simulate_ideal_gas_full(IdealGasSpec{1.0, 400, 400.0}, grid, s).initial_speed_sq;
      const auto b = simulate_ideal_gas_full(IdealGasSpec{4.0, 400, 400.0}, grid, 100 + s).initial_speed_sq;
      cold.insert(cold.end(), a.begin(), a.end());
      hot.insert(hot.end(), b.begin(), b.end());
    }
    // Delta method on the ratio of two independent means.
    const double mc = mean(cold), mh = mean(hot);
    const double vc = sample_sd(cold) * sample_sd(cold) / static_cast<double>(cold.size());
    const double vh = sample_sd(hot) * sample_sd(hot) / static_cast<double>(hot.size());
    const double ratio = mh / mc;
    const double se = ratio * std::sqrt(vh / (mh * mh) + vc / (mc * mc));
    CHECK(std::abs(ratio - 4.0) <= 3.0 * se);
    // Three velocity components of variance T.
    CHECK(std::abs(mc - 3.0) <= 3.0 * std::sqrt(vc));
  }

  TEST_CASE("energy conservation and containment") {
    const SimGrid grid{1.0, 19};
    for (double temperature : {1.0, 10.0}) {
      const auto g = simulate_ideal_gas_full(IdealGasSpec{temperature, 400, 400.0}, grid, 3);
      REQUIRE(g.kinetic_energy.size() == 20);
      for (double e : g.kinetic_energy)
        CHECK(std::abs(e - g.kinetic_energy[0]) <= 1e-9 * g.kinetic_energy[0]);
      CHECK(g.radius == doctest::Approx(0.35));
      CHECK(g.box_length == doctest::Approx(std::cbrt(400.0)));
      REQUIRE(g.positions.size() == 400);
      for (const auto& p : g.positions.paths) {
        CHECK(p.dim() == 3);
        for (double x : p.values()) {
          CHECK(x >= g.radius - 1e-12);
          CHECK(x <= g.box_length - g.radius + 1e-12);
        }
      }
    }
  }

  TEST_CASE("lone particle keeps its speed through wall bounces") {
    const auto g = simulate_ideal_gas_full(IdealGasSpec{10.0, 1, 1.0}, SimGrid{5.0, 50}, 4);
    for (double e : g.kinetic_energy) CHECK(e == doctest::Approx(g.kinetic_energy[0]).epsilon(1e-12));
    CHECK(g.kinetic_energy[0] == doctest::Approx(0.5 * g.initial_speed_sq[0]));
  }

  TEST_CASE("determinism and errors") {
    const SimGrid grid{1.0, 19};
    CHECK(simulate_ideal_gas(IdealGasSpec{2.0, 50, 50.0}, grid, 9).paths ==
          simulate_ideal_gas(IdealGasSpec{2.0, 50, 50.0}, grid, 9).paths);
    CHECK(simulate(ModelSpec{IdealGasSpec{2.0, 50, 50.0}}, grid, 999, 9).size() == 50);
    CHECK_THROWS_AS(simulate_ideal_gas(IdealGasSpec{0.5, 50, 50.0}, grid, 1), Error);
    CHECK_THROWS_AS(simulate_ideal_gas(IdealGasSpec{2.0, 0, 50.0}, grid, 1), Error);
  }
}
