#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "speedrs/error.hpp"
#include "speedrs/mmd.hpp"
#include "speedrs/sde.hpp"
#include "speedrs/sigkernel.hpp"
#include "speedrs/signature.hpp"

using namespace speedrs;

namespace {

// Time-augmented path scaled so that its total variation is `tv`.
Path small_path(std::size_t length, std::size_t dim, double tv, std::uint64_t seed) {
  const Path raw = augment_time(testing::random_path(length, dim, 1.0, seed));
  const double s = tv / total_variation(raw);
  std::vector<double> v(raw.values().begin(), raw.values().end());
  for (double& x : v) x *= s;
  return Path(std::vector<double>(raw.times().begin(), raw.times().end()), std::move(v), raw.dim(), true);
}

}  // namespace

TEST_SUITE("sigkernel") {
  TEST_CASE("static kernels") {
    const std::vector<double> a{0.3, -1.0}, b{1.0, 0.3};
    CHECK(StaticKernel::rbf(0.7)(a, a) == 1.0);
    CHECK(StaticKernel::linear()(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 2.0}) == 0.0);
    CHECK(StaticKernel::rbf(0.5)(std::vector<double>{0.0}, std::vector<double>{1.0}) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
    CHECK(StaticKernel::linear()(a, b) == doctest::Approx(0.0));
    CHECK_THROWS_AS(StaticKernel::rbf(0.0).validate(), Error);
  }

  TEST_CASE("boundary and symmetry") {
    const Path x = small_path(8, 2, 1.0, 1);
    const Path flat({0.0, 0.5, 1.0}, std::vector<double>(9, 0.25), 3, true);
    CHECK(solve_goursat(x, flat, StaticKernel::linear(), GoursatConfig{}) == 1.0);

    const Path y = small_path(11, 2, 1.5, 2);
    for (auto scheme : {GoursatScheme::FirstOrder, GoursatScheme::SecondOrder})
      for (unsigned order : {0u, 1u, 3u}) {
        const GoursatConfig cfg{order, scheme};
        for (const auto& k : {StaticKernel::linear(), StaticKernel::rbf(0.5)}) {
          const double xy = solve_goursat(x, y, k, cfg), yx = solve_goursat(y, x, k, cfg);
          CHECK(testing::rel_err(xy, yx) <= 1e-12);
        }
      }
    CHECK_THROWS_AS(solve_goursat(x, small_path(5, 1, 1.0, 3), StaticKernel::linear(), GoursatConfig{}), Error);
    CHECK_THROWS_AS(GoursatConfig({13, GoursatScheme::SecondOrder}).validate(), Error);
  }

  TEST_CASE("matches the truncated signature inner product") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Path x = small_path(6, 2, 0.5, 100 + seed), y = small_path(9, 2, 0.5, 200 + seed);
      const double pde = solve_goursat(x, y, StaticKernel::linear(), {2, GoursatScheme::SecondOrder});
      const double sig = sig_inner_product(signature_truncated(x, 8), signature_truncated(y, 8));
      CHECK(testing::rel_err(pde, sig) <= 1e-2);
    }
  }

  TEST_CASE("refinement converges for both schemes") {
    const Path x = small_path(5, 1, 2.0, 7), y = small_path(7, 1, 2.0, 8);
    const double ref = solve_goursat(x, y, StaticKernel::linear(), {8, GoursatScheme::SecondOrder});
    for (auto scheme : {GoursatScheme::FirstOrder, GoursatScheme::SecondOrder}) {
      // Coarse grids are pre-asymptotic; from order 2 on the error must fall
      // by at least the scheme's rate, give or take a factor of 1.5.
      const double rate = scheme == GoursatScheme::FirstOrder ? 2.0 : 4.0;
      double prev = std::abs(solve_goursat(x, y, StaticKernel::linear(), {2, scheme}) - ref);
      for (unsigned order = 3; order <= 6; ++order) {
        const double e = std::abs(solve_goursat(x, y, StaticKernel::linear(), {order, scheme}) - ref);
        MESSAGE(std::string(scheme == GoursatScheme::FirstOrder ? "first" : "second") << " order " << order << " error " << e);
        CHECK(e * rate / 1.5 < prev);
        prev = e;
      }
    }
  }

  TEST_CASE("node grid holds every window kernel") {
    const auto b = simulate_gbm(GbmSpec{0.1, 0.4, 1.0}, SimGrid{1.0, 9}, 2, 4);
    const auto in = kernel_inputs(b);
    const GoursatConfig cfg{2, GoursatScheme::SecondOrder};
    const auto k = StaticKernel::rbf(0.5);
    const Eigen::MatrixXd nodes = solve_goursat_nodes(in[0], in[1], k, cfg);
    CHECK(nodes(9, 9) == solve_goursat(in[0], in[1], k, cfg));
    for (Eigen::Index s : {1, 4, 7})
      CHECK(testing::rel_err(nodes(s, s), solve_goursat(restrict_window(in[0], in[0].time(static_cast<std::size_t>(s))),
                                                         restrict_window(in[1], in[1].time(static_cast<std::size_t>(s))), k,
                                                         cfg)) <= 1e-12);
    CHECK(nodes.row(0).isOnes());
    CHECK(nodes.col(0).isOnes());
  }

  TEST_CASE("Gram matrices") {
    const auto b = simulate_gbm(GbmSpec{0.1, 0.4, 1.0}, SimGrid{1.0, 14}, 10, 9);
    const auto in = kernel_inputs(b);
    const auto k = StaticKernel::rbf(0.5);
    const GoursatConfig cfg{};
    const std::span<const Path> one(in.data(), 1);
    const auto g1 = gram_matrix(one, one, k, cfg, true);
    CHECK(g1.rows() == 1);
    CHECK(g1(0, 0) == solve_goursat(in[0], in[0], k, cfg));

    const auto sym = gram_matrix(in, in, k, cfg, true), full = gram_matrix(in, in, k, cfg, false);
    CHECK((sym - full).cwiseAbs().maxCoeff() <= 1e-12 * full.cwiseAbs().maxCoeff());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8 * sym.trace());
    CHECK_THROWS_AS(gram_matrix(in, one, k, cfg, true), Error);
  }

  TEST_CASE("overflow is reported") {
    Eigen::MatrixXd g(40, 40);
    for (Eigen::Index i = 0; i < 40; ++i)
      for (Eigen::Index j = 0; j < 40; ++j) g(i, j) = 400.0 * static_cast<double>(i * j);
    CHECK_THROWS_AS(goursat_from_gram(g, GoursatConfig{}), Error);
    try {
      goursat_from_gram(g, GoursatConfig{});
    } catch (const Error& e) {
      CHECK(e.code() == Errc::NumericalOverflow);
    }
  }
}
