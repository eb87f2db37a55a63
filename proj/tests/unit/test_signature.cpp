#include <doctest.h>

#include <algorithm>
#include <random>

#include "helpers.hpp"
#include "speedrs/error.hpp"
#include "speedrs/sde.hpp"
#include "speedrs/signature.hpp"

using namespace speedrs;

namespace {

// Iterated integrals by the trapezoid rule on a uniform refinement of the
// piecewise-linear path: level k advances by the average of level k-1 at both
// ends of each sub-step. Second-order accurate in the sub-step.
std::vector<std::vector<double>> trapezoid_signature(const Path& p, std::size_t level, std::size_t subdiv) {
  const std::size_t d = p.dim();
  std::vector<std::vector<double>> s(level + 1);
  std::size_t width = 1;
  for (std::size_t k = 0; k <= level; ++k, width *= d) s[k].assign(width, 0.0);
  s[0][0] = 1.0;
  std::vector<double> dx(d);
  for (std::size_t i = 0; i + 1 < p.length(); ++i) {
    for (std::size_t c = 0; c < d; ++c) dx[c] = (p.value(i + 1, c) - p.value(i, c)) / static_cast<double>(subdiv);
    for (std::size_t step = 0; step < subdiv; ++step) {
      auto prev = s;
      for (std::size_t k = 1; k <= level; ++k)
        for (std::size_t w = 0; w < s[k - 1].size(); ++w)
          for (std::size_t c = 0; c < d; ++c) s[k][w * d + c] += 0.5 * (prev[k - 1][w] + s[k - 1][w]) * dx[c];
    }
  }
  return s;
}

double level_err(std::span<const double> a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return num / den;
}

}  // namespace

TEST_SUITE("signature") {
  TEST_CASE("segment closed forms") {
    const std::vector<double> inc{1.0, 1.0};
    const auto s = segment_signature(inc, 2);
    CHECK(std::vector<double>(s[1].begin(), s[1].end()) == std::vector<double>{1.0, 1.0});
    CHECK(std::vector<double>(s[2].begin(), s[2].end()) == std::vector<double>{0.5, 0.5, 0.5, 0.5});

    const auto z = segment_signature(std::vector<double>{0.0, 0.0, 0.0}, 3);
    for (std::size_t k = 1; k <= 3; ++k)
      for (double v : z[k]) CHECK(v == 0.0);
    CHECK(z[0][0] == 1.0);

    const auto one = segment_signature(std::vector<double>{2.0}, 3);
    CHECK(one[1][0] == 2.0);
    CHECK(one[2][0] == 2.0);
    CHECK(one[3][0] == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  }

  TEST_CASE("flat layout") {
    CHECK(TruncatedSig::flat_size(2, 3) == 14);
    CHECK(TruncatedSig::flat_size(3, 2) == 12);
    const auto s = segment_signature(std::vector<double>{0.3, -0.2}, 4);
    const auto f = s.flatten();
    CHECK(f.size() == 30);
    CHECK(truncate_flat(f, 2, 2) == std::vector<double>(f.begin(), f.begin() + 6));
    CHECK_THROWS_AS(truncate_flat(f, 2, 5), Error);
  }

  TEST_CASE("chen laws") {
    const auto a = segment_signature(std::vector<double>{0.4, -0.1}, 4);
    const auto b = segment_signature(std::vector<double>{-0.3, 0.7}, 4);
    const TruncatedSig id(2, 4);
    CHECK(chen_product(a, id).flatten() == a.flatten());
    CHECK(chen_product(id, a).flatten() == a.flatten());
    const auto ab = chen_product(a, b);
    CHECK(ab[1][0] == doctest::Approx(0.1));
    CHECK(ab[1][1] == doctest::Approx(0.6));
    CHECK_THROWS_AS(chen_product(a, segment_signature(std::vector<double>{1.0}, 4)), Error);

    const Path p({0.0, 1.0, 2.0}, {0.0, 0.0, 0.4, -0.1, 0.1, 0.6}, 2);
    const auto direct = signature_truncated(p, 4).flatten();
    const auto prod = ab.flatten();
    for (std::size_t i = 0; i < direct.size(); ++i) CHECK(direct[i] == doctest::Approx(prod[i]).epsilon(1e-14));

    // The two-segment path against the quadrature oracle.
    const auto oracle = trapezoid_signature(p, 4, 2000);
    for (std::size_t k = 1; k <= 4; ++k) CHECK(level_err(ab[k], oracle[k]) < 1e-6);
  }

  TEST_CASE("signature of a path") {
    const Path constant({0.0, 0.5, 1.0}, {1.0, 2.0, 1.0, 2.0, 1.0, 2.0}, 2);
    const auto c = signature_truncated(constant, 3);
    CHECK(c.flatten() == std::vector<double>(14, 0.0));

    const Path seg({0.0, 1.0}, {1.0, 1.0, 1.5, 0.2}, 2);
    CHECK(signature_truncated(seg, 3).flatten() == segment_signature(std::vector<double>{0.5, -0.8}, 3).flatten());

    const Path p = testing::random_path(6, 2, 0.5, 17);
    const auto s = signature_truncated(p, 4);
    const auto oracle = trapezoid_signature(p, 4, 2000);
    for (std::size_t k = 1; k <= 4; ++k) CHECK(level_err(s[k], oracle[k]) < 1e-6);
  }

  TEST_CASE("kernelize_path") {
    const Path a = augment_time(Path({0.0, 0.5, 1.0}, {0.0, 1.0, -2.0}, 1));
    const Path k = kernelize_path(a);
    CHECK(k.value(0, 1) == 1.0);
    CHECK(k.value(1, 1) == doctest::Approx(0.36787944117144233).epsilon(1e-15));
    CHECK(k.value(2, 1) == doctest::Approx(std::exp(-4.0)));
    for (std::size_t i = 0; i < 3; ++i) CHECK(k.value(i, 0) == a.value(i, 0));
    CHECK_THROWS_AS(kernelize_path(Path({0.0, 1.0}, {0.0, 1.0}, 1)), Error);
  }

  TEST_CASE("expected signature") {
    const auto b = simulate_gbm(GbmSpec{0.1, 0.3, 90.0}, SimGrid{1.0, 14}, 40, 5);
    const auto e = expected_signature(b, 3);
    CHECK(e.size() == 14);

    PathBundle same;
    same.paths.assign(7, b.paths[3]);
    const auto one = lifted_signature(b.paths[3], 3);
    const auto e7 = expected_signature(same, 3);
    for (std::size_t i = 0; i < one.size(); ++i) CHECK(e7[i] == doctest::Approx(one[i]).epsilon(1e-14));

    const std::span<const Path> all(b.paths);
    const auto h1 = expected_signature(all.first(20), 3), h2 = expected_signature(all.subspan(20), 3);
    for (std::size_t i = 0; i < e.size(); ++i) CHECK(0.5 * (h1[i] + h2[i]) == doctest::Approx(e[i]).epsilon(1e-13));

    auto shuffled = b.paths;
    std::mt19937_64 g(3);
    std::shuffle(shuffled.begin(), shuffled.end(), g);
    CHECK(expected_signature(shuffled, 3) == e);

    // The lift normalizes the start, so the level-1 time entry is the horizon.
    CHECK(e[0] == doctest::Approx(1.0));
    CHECK_THROWS_AS(expected_signature(std::span<const Path>{}, 3), Error);
  }

  TEST_CASE("inner product") {
    const TruncatedSig id(2, 5);
    CHECK(sig_inner_product(id, id) == 1.0);
    const auto s = segment_signature(std::vector<double>{0.7, -1.3}, 5);
    CHECK(sig_inner_product(s, id) == 1.0);
    // One segment: sum_k |dx|^(2k) / (k!)^2.
    double expect = 0.0, term = 1.0;
    const double n2 = 0.49 + 1.69;
    for (int k = 0; k <= 5; ++k) {
      expect += term;
      term *= n2 / ((k + 1.0) * (k + 1.0));
    }
    CHECK(sig_inner_product(s, s) == doctest::Approx(expect).epsilon(1e-14));
  }
}
