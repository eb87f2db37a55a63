#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "speedrs/error.hpp"
#include "speedrs/model_spec.hpp"
#include "speedrs/rng.hpp"
#include "speedrs/sde.hpp"
#include "speedrs/stats.hpp"

using namespace speedrs;

namespace {

std::vector<double> terminal(const PathBundle& b, std::size_t col = 0) {
  std::vector<double> out;
  for (const auto& p : b.paths) out.push_back(p.value(p.length() - 1, col));
  return out;
}

double se_of_mean(const std::vector<double>& x) { return sample_sd(x) / std::sqrt(static_cast<double>(x.size())); }

// Euler drift compounds as (1 + mu dt)^n in expectation.
double euler_mean(double mu, std::size_t n) { return std::pow(1.0 + mu / static_cast<double>(n), static_cast<double>(n)); }

}  // namespace

TEST_SUITE("sde") {
  TEST_CASE("parameter sampling ranges") {
    Rng rng(1);
    const std::size_t n = 10000;
    std::vector<double> nu, hurst, xi0, rho, sigma, gamma, alpha;
    for (std::size_t i = 0; i < n; ++i) {
      const auto rb = std::get<RBergomiSpec>(sample_params(ModelKind::RBergomi, rng).params);
      nu.push_back(rb.nu);
      hurst.push_back(rb.hurst);
      xi0.push_back(rb.xi0);
      rho.push_back(rb.rho);
      const auto cev = std::get<CevSpec>(sample_params(ModelKind::Cev, rng).params);
      sigma.push_back(cev.sigma);
      gamma.push_back(cev.gamma);
      alpha.push_back(std::get<MixtureSpec>(sample_params(ModelKind::Mixture, rng).params).alpha);
    }
    auto check_uniform = [&](const std::vector<double>& v, double lo, double hi) {
      CHECK(*std::min_element(v.begin(), v.end()) >= lo);
      CHECK(*std::max_element(v.begin(), v.end()) <= hi);
      const double se = (hi - lo) / std::sqrt(12.0 * static_cast<double>(v.size()));
      CHECK(std::abs(mean(v) - 0.5 * (lo + hi)) <= 3.0 * se);
    };
    check_uniform(nu, 0.5, 4.0);
    check_uniform(hurst, 0.025, 0.5);
    check_uniform(xi0, 0.01, 0.2);
    check_uniform(rho, -1.0, 1.0);
    check_uniform(sigma, 0.2, 0.8);
    check_uniform(gamma, 0.5, 1.0);
    check_uniform(alpha, 0.0, 1.0);

    Rng a(9), b(9);
    CHECK(sample_params(ModelKind::MeanReverting, a) == sample_params(ModelKind::MeanReverting, b));
  }

  TEST_CASE("model spec JSON") {
    Rng rng(2);
    const ModelSpec m = sample_params(ModelKind::Mixture, rng, {90.0, 400, 400.0});
    CHECK(ModelSpec::from_json(m.to_json()) == m);
    CHECK(m.with_x0(1.0).to_json().find("\"x0\":90") == std::string::npos);
    CHECK_THROWS_AS(ModelSpec::from_json("{\"model\":\"heston\"}"), Error);
    const ModelSpec bad_hurst{RBergomiSpec{0.1, 1.0, 0.6, 0.0, 1.0}};
    CHECK_THROWS_AS(bad_hurst.validate(), Error);
  }

  TEST_CASE("GBM") {
    const SimGrid grid{1.0, 14};
    const auto flat = simulate_gbm(GbmSpec{0.1, 0.0, 90.0}, grid, 3, 1);
    for (std::size_t i = 0; i <= 14; ++i)
      CHECK(flat.paths[2].value(i, 0) == doctest::Approx(90.0 * std::pow(1.0 + 0.1 / 14.0, i)).epsilon(1e-14));

    const auto b = simulate_gbm(GbmSpec{0.1, 0.3, 1.0}, grid, 100000, 2);
    const auto t = terminal(b);
    CHECK(std::abs(mean(t) - euler_mean(0.1, 14)) <= 3.0 * se_of_mean(t));
    CHECK(simulate_gbm(GbmSpec{0.1, 0.3, 1.0}, grid, 10, 5).paths == simulate_gbm(GbmSpec{0.1, 0.3, 1.0}, grid, 10, 5).paths);
  }

  TEST_CASE("CEV") {
    const SimGrid grid{1.0, 14};
    CHECK(simulate_cev(CevSpec{0.1, 0.3, 1.0, 1.0}, grid, 50, 3).paths ==
          simulate_gbm(GbmSpec{0.1, 0.3, 1.0}, grid, 50, 3).paths);
    const auto additive = terminal(simulate_cev(CevSpec{0.1, 0.05, 0.0, 1.0}, grid, 100000, 4));
    CHECK(std::abs(mean(additive) - euler_mean(0.1, 14)) <= 3.0 * se_of_mean(additive));
    const auto t = terminal(simulate_cev(CevSpec{0.1, 0.3, 0.75, 1.0}, grid, 100000, 5));
    CHECK(std::abs(mean(t) - euler_mean(0.1, 14)) <= 3.0 * se_of_mean(t));
  }

  TEST_CASE("mean-reverting") {
    const SimGrid grid{1.0, 14};
    const auto constant_vol = terminal(simulate_mean_reverting(MeanRevertingSpec{0.1, 0.5, 0.3, 0.0, -0.5, 0.3, 1.0}, grid, 100000, 6));
    CHECK(std::abs(mean(constant_vol) - euler_mean(0.1, 14)) <= 3.0 * se_of_mean(constant_vol));

    const auto full = simulate_mean_reverting_full(MeanRevertingSpec{0.1, 10.0, 0.3, 0.2, 0.3, 0.8, 1.0}, grid, 10000, 7);
    const auto v = terminal(full.variance);
    CHECK(std::abs(mean(v) - 0.3) <= 3.0 * se_of_mean(v) + 1e-3);
    for (const auto& p : full.variance.paths)
      for (double x : p.values()) CHECK(std::isfinite(x));
  }

  TEST_CASE("rough Bergomi") {
    const SimGrid grid{1.0, 14};
    const double dt = grid.dt();
    // The lag b solves b^(2H-1) = cell average of u^(2H-1); the average is
    // checked by a fine midpoint rule away from the singular first cell.
    const double hurst = 0.25;
    for (std::size_t k = 2; k <= 14; ++k) {
      const double lo = static_cast<double>(k - 1) * dt;
      const std::size_t m = 20000;
      double avg = 0.0;
      for (std::size_t q = 0; q < m; ++q) avg += std::pow(lo + (static_cast<double>(q) + 0.5) * dt / m, 2.0 * hurst - 1.0);
      avg /= static_cast<double>(m);
      const double lag = moment_matching_lag(hurst, k, dt);
      CHECK(std::pow(lag, 2.0 * hurst - 1.0) == doctest::Approx(avg).epsilon(1e-8));
      CHECK(lag > lo);
      CHECK(lag < lo + dt);
    }
    // First cell: the average of u^(-1/2) over [0, dt] is 2 / sqrt(dt).
    CHECK(std::pow(moment_matching_lag(hurst, 1, dt), -0.5) == doctest::Approx(2.0 / std::sqrt(dt)).epsilon(1e-12));

    const auto noise = rbergomi_pair_noise(-0.7, 14, 11);
    for (std::size_t i = 0; i < 14; ++i) CHECK(noise.vol[0][i] + noise.vol[1][i] == 0.0);

    // rho = -1 makes each antithetic pair exact mirror images, so only n / 2
    // draws are independent.
    const auto flat = simulate_rbergomi_full(RBergomiSpec{0.09, 0.0, 0.2, -1.0, 1.0}, grid, 10000, 12);
    const auto lp = terminal(flat.log_price);
    const double var = sample_sd(lp) * sample_sd(lp);
    CHECK(std::abs(var - 0.09) <= 3.0 * 0.09 * std::sqrt(2.0 / (0.5 * static_cast<double>(lp.size()))));
    for (const auto& p : flat.variance.paths)
      for (std::size_t i = 0; i < p.length(); ++i) CHECK(p.value(i, 0) == doctest::Approx(0.09).epsilon(1e-14));

    CHECK_THROWS_AS(simulate_rbergomi(RBergomiSpec{}, grid, 3, 1), Error);
  }

  TEST_CASE("mixtures") {
    const SimGrid grid{1.0, 4};
    const auto a = simulate_gbm(GbmSpec{0.1, 0.0, 2.0}, grid, 4, 1);
    const auto b = simulate_gbm(GbmSpec{0.1, 0.0, 4.0}, grid, 4, 1);
    CHECK(mixture_paths(1.0, a, b).paths == a.paths);
    CHECK(mixture_paths(0.0, a, b).paths == b.paths);
    CHECK(mixture_paths(0.5, a, b).paths[0].value(0, 0) == 3.0);
    CHECK_THROWS_AS(mixture_paths(0.5, a, simulate_gbm(GbmSpec{}, grid, 3, 1)), Error);

    const ModelSpec mix = make_mixture(0.3, ModelSpec{MeanRevertingSpec{}}, ModelSpec{RBergomiSpec{}});
    CHECK(simulate(mix, grid, 6, 8).paths == simulate(mix, grid, 6, 8).paths);
  }

  TEST_CASE("barrier pricing") {
    const SimGrid grid{1.0, 14};
    const auto b = simulate_gbm(GbmSpec{0.1, 0.3, 90.0}, grid, 5000, 3);
    double vanilla = 0.0;
    for (const auto& p : b.paths) vanilla += std::max(p.value(14, 0) - 80.0, 0.0);
    vanilla /= 5000.0;
    CHECK(price_barrier_mc(b, 80.0, 90.0) == doctest::Approx(vanilla).epsilon(1e-12));
    CHECK(price_barrier_mc(b, 80.0, 1.0) == 0.0);
    const double p = price_barrier_mc(b, 80.0, 85.0);
    CHECK(p > 0.0);
    CHECK(p < vanilla);

    const ModelSpec mr{MeanRevertingSpec{0.15, 0.4, 0.23, 0.25, -0.94, 0.65, 90.0}};
    const ModelSpec rb{RBergomiSpec{0.1, 1.2, 0.25, -0.85, 90.0}};
    const std::vector<double> alphas{0.0, 0.5, 1.0};
    const auto shared = price_barrier_mixtures(alphas, mr, rb, grid, 5000, 21, 80.0, 85.0);
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      const auto single = price_barrier_model(make_mixture(alphas[i], mr, rb), grid, 5000, 21, 80.0, 85.0);
      CHECK(shared[i].price == single.price);
      CHECK(shared[i].std_error == single.std_error);
    }
  }
}
