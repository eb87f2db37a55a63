#include <doctest.h>

#include <algorithm>
#include <random>

#include "helpers.hpp"
#include "speedrs/error.hpp"
#include "speedrs/mmd.hpp"
#include "speedrs/sde.hpp"
#include "speedrs/stats.hpp"

using namespace speedrs;

namespace {

const GbmSpec kGbm{0.1, 0.4, 1.0};
const RBergomiSpec kRb{0.1, 1.2, 0.25, -0.85, 1.0};

std::vector<Path> gbm_inputs(std::size_t n, std::uint64_t seed, std::size_t length = 15) {
  return kernel_inputs(simulate_gbm(kGbm, SimGrid{1.0, length - 1}, n, seed));
}

}  // namespace

TEST_SUITE("mmd") {
  TEST_CASE("unbiased combination") {
    const Eigen::MatrixXd kxx = Eigen::MatrixXd::Constant(4, 4, 0.7), kyy = Eigen::MatrixXd::Constant(3, 3, 0.7);
    const Eigen::MatrixXd kxy = Eigen::MatrixXd::Constant(4, 3, 0.7);
    CHECK(unbiased_combination(kxx, kyy, kxy) == doctest::Approx(0.0).epsilon(1e-15));
    // Diagonals never enter.
    Eigen::MatrixXd d = kxx;
    d.diagonal().setConstant(99.0);
    CHECK(unbiased_combination(d, kyy, kxy) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK_THROWS_AS(unbiased_combination(Eigen::MatrixXd::Ones(1, 1), kyy, Eigen::MatrixXd::Ones(1, 3)), Error);
  }

  TEST_CASE("first order estimator") {
    const auto k = StaticKernel::rbf(0.5);
    const auto a = gbm_inputs(12, 1), b = gbm_inputs(15, 2);
    const GoursatConfig cfg{};
    CHECK(mmd1_unbiased(a, b, k, cfg) == doctest::Approx(mmd1_unbiased(b, a, k, cfg)).epsilon(1e-12));
    CHECK_THROWS_AS(mmd1_unbiased(std::span<const Path>(a).first(1), b, k, cfg), Error);

    std::vector<double> est;
    for (std::uint64_t s = 0; s < 20; ++s) est.push_back(mmd1_unbiased(gbm_inputs(50, 10 + 2 * s), gbm_inputs(50, 11 + 2 * s), k, cfg));
    const double se = sample_sd(est) / std::sqrt(20.0);
    CHECK(std::abs(mean(est)) <= 3.0 * se);
  }

  TEST_CASE("conditional embedding inner products") {
    const auto a = gbm_inputs(8, 3), b = gbm_inputs(8, 4);
    const auto k = StaticKernel::rbf(0.5);
    const GoursatConfig cfg{};
    const auto ctx = CondKmeContext::build(a, b, k, cfg, 1e-3);
    CHECK(ctx.windows_x() == 15);
    const Eigen::MatrixXd all = ctx.all_inner();
    CHECK(all.rows() == 15 * 8);
    for (std::size_t s : {0u, 6u, 14u})
      for (std::size_t t : {2u, 14u}) {
        const double v = cond_kme_inner(ctx, 3, 5, s, t);
        CHECK(all(static_cast<Eigen::Index>(s * 8 + 3), static_cast<Eigen::Index>(t * 8 + 5)) == doctest::Approx(v).epsilon(1e-10));
        const Eigen::VectorXd kx = ctx.x().grams[s].col(3), ky = ctx.y().grams[t].col(5);
        CHECK(ctx.inner(kx, s, ky, t) == doctest::Approx(v).epsilon(1e-10));
      }

    // Shrinkage: larger ridge, smaller magnitude.
    double prev = 1e300;
    for (double lam : {1e-1, 1.0, 10.0}) {
      const auto c = CondKmeContext::build(a, b, k, cfg, lam);
      const double v = std::abs(cond_kme_inner(c, 0, 0, 14, 14));
      CHECK(v < prev);
      prev = v;
    }

    const auto self = CondKmeContext::build(a, a, k, cfg, 1e-3);
    CHECK(cond_kme_inner(self, 2, 2, 9, 9) > 0.0);
    CHECK(cond_kme_inner(self, 1, 6, 3, 11) == doctest::Approx(cond_kme_inner(self, 6, 1, 11, 3)).epsilon(1e-10));
    CHECK_THROWS_AS(cond_kme_inner(ctx, 8, 0, 0, 0), Error);
    CHECK_THROWS_AS(cond_kme_inner(ctx, 0, 0, 15, 0), Error);
  }

  TEST_CASE("window embedding errors") {
    auto a = gbm_inputs(4, 5);
    CHECK_THROWS_AS(window_embedding(a, StaticKernel::rbf(0.5), GoursatConfig{}, 1e-11), Error);
    a[1] = kernel_inputs(simulate_gbm(kGbm, SimGrid{2.0, 14}, 1, 6))[0];
    try {
      window_embedding(a, StaticKernel::rbf(0.5), GoursatConfig{}, 1e-3);
      FAIL("expected WindowGridMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::WindowGridMismatch);
    }
    const auto w = window_embedding(gbm_inputs(4, 7), StaticKernel::rbf(0.5), GoursatConfig{}, 1e-3, 4);
    CHECK(w.window_times.size() == 5);  // stamps 0, 4, 8, 12 and the last one
  }

  TEST_CASE("second order estimator") {
    Mmd2Options opt;
    const auto a = gbm_inputs(10, 8), b = kernel_inputs(simulate_rbergomi(kRb, SimGrid{1.0, 14}, 10, 9));
    const double ab = mmd2_unbiased(a, b, opt), ba = mmd2_unbiased(b, a, opt);
    CHECK(std::abs(ab - ba) <= 1e-10 * std::max(1.0, std::abs(ab)));

    auto shuffled = a;
    std::mt19937_64 g(1);
    std::shuffle(shuffled.begin(), shuffled.end(), g);
    CHECK(mmd2_unbiased(shuffled, b, opt) == ab);

    const auto r = mmd2_detailed(a, b, opt);
    CHECK(r.k_xx.rows() == 10);
    CHECK((r.k_xx - r.k_xx.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.value == ab);

    std::vector<double> same, cross;
    for (std::uint64_t s = 0; s < 10; ++s) {
      same.push_back(mmd2_unbiased(gbm_inputs(30, 100 + s), gbm_inputs(30, 200 + s), opt));
      cross.push_back(mmd2_unbiased(gbm_inputs(30, 300 + s),
                                    kernel_inputs(simulate_rbergomi(kRb, SimGrid{1.0, 14}, 30, 400 + s)), opt));
    }
    CHECK(std::abs(mean(same)) <= 0.05);
    CHECK(mean(cross) > mean(same));
  }
}
