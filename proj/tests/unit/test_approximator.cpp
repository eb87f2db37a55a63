#include <doctest.h>

#include <filesystem>

#include "speedrs/approximator.hpp"
#include "speedrs/error.hpp"
#include "speedrs/model_spec.hpp"
#include "speedrs/rng.hpp"
#include "speedrs/signature.hpp"

using namespace speedrs;

namespace {

CorpusConfig tiny_corpus() {
  CorpusConfig cfg;
  cfg.n_rows = 12;
  cfg.zero_fraction = 0.25;
  cfg.batch = 10;
  cfg.level = 3;
  cfg.seed = 5;
  return cfg;
}

std::string temp_file(const char* name) { return (std::filesystem::temp_directory_path() / name).string(); }

}  // namespace

TEST_SUITE("approximator") {
  TEST_CASE("feature sizes and projection") {
    // Lifted paths are 2-d and level 0 is dropped: 2 + 4 + 8 at level 3.
    CHECK(approx_sig_size(2) == 6);
    CHECK(approx_sig_size(3) == 14);
    CHECK(approx_sig_size(4) == 30);
    CHECK(default_approx_width(2) == 25);
    CHECK(default_approx_width(3) == 60);
    CHECK(default_approx_width(4) == 90);

    std::vector<double> f(2 * 30);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<double>(i);
    const auto p = project_feature(f, 2);
    REQUIRE(p.size() == 12);
    CHECK(p[0] == 0.0);
    CHECK(p[5] == 5.0);
    CHECK(p[6] == 30.0);
    CHECK(p[11] == 35.0);
    CHECK_THROWS_AS(project_feature(std::vector<double>(30), 4), Error);
    MmdRow row;
    row.feature = f;
    CHECK(corpus_level(row) == 4);
    row.feature.pop_back();
    CHECK_THROWS_AS(corpus_level(row), Error);
  }

  TEST_CASE("corpus rows") {
    const auto cfg = tiny_corpus();
    const auto rows = build_mmd_dataset(cfg);
    REQUIRE(rows.size() == 12);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(rows[i].feature.size() == 2 * approx_sig_size(3));
      CHECK(rows[i].target >= 0.0);
      CHECK(rows[i].seed == derive_seed(cfg.seed, i));
      CHECK(rows[i].zero() == (i >= 9));
    }
    // A zero row pairs two independent bundles of one model.
    const auto& z = rows.back();
    CHECK(z.spec_a == z.spec_b);
    const std::vector<double> a(z.feature.begin(), z.feature.begin() + 14), b(z.feature.begin() + 14, z.feature.end());
    CHECK(a != b);
    // The time coordinate of the lift moves by the horizon.
    CHECK(a[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(b[0] == doctest::Approx(1.0).epsilon(1e-14));

    const auto again = make_mmd_row(cfg, derive_seed(cfg.seed, 3), false);
    CHECK(again.feature == rows[3].feature);
    CHECK(again.target == rows[3].target);

    CorpusConfig bad = cfg;
    bad.batch = 9;
    CHECK_THROWS_AS(build_mmd_dataset(bad), Error);
  }

  TEST_CASE("corpus CSV round trip") {
    const auto rows = build_mmd_dataset(tiny_corpus());
    const auto file = temp_file("speedrs_unit_corpus.csv");
    write_corpus_csv(file, rows);
    const auto back = read_corpus_csv(file);
    std::filesystem::remove(file);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(back[i].feature == rows[i].feature);
      CHECK(back[i].target == rows[i].target);
      CHECK(back[i].spec_a == rows[i].spec_a);
      CHECK(back[i].seed == rows[i].seed);
      CHECK(ModelSpec::from_json(back[i].spec_b) == ModelSpec::from_json(rows[i].spec_b));
    }
    CHECK_THROWS_AS(read_corpus_csv(temp_file("speedrs_unit_missing.csv")), Error);
  }

  TEST_CASE("symmetrized and clamped distances") {
    const auto rows = build_mmd_dataset(tiny_corpus());
    TrainConfig tc;
    tc.epochs = 30;
    tc.batch_size = 4;
    tc.initial_lr = 1e-2;
    auto fit = train_approximator(rows, 2, 8, tc);
    CHECK(fit.model.level == 2);
    CHECK(fit.history.train_mse.size() == 30);
    MmdApproximator m = fit.model;

    const auto a = truncate_flat(std::span(rows[0].feature).first(14), 2, 2);
    const auto b = truncate_flat(std::span(rows[1].feature).first(14), 2, 2);
    CHECK(approx_distance(m, a, b) == approx_distance(m, b, a));
    CHECK(approx_distance(m, a, b) >= 0.0);
    CHECK_THROWS_AS(approx_distance(m, rows[0].feature, b), Error);

    // Without clamping the raw network output shows through.
    m.clamp = false;
    m.symmetrize = false;
    const double raw = approx_distance(m, a, b);
    std::vector<double> in(a.begin(), a.end());
    in.insert(in.end(), b.begin(), b.end());
    CHECK(raw == m.reg.predict(in));

    const auto file = temp_file("speedrs_unit_approx.ckpt");
    save_approximator(file, m);
    const auto back = load_approximator(file);
    std::filesystem::remove(file);
    CHECK(back.level == 2);
    CHECK_FALSE(back.clamp);
    CHECK_FALSE(back.symmetrize);
    CHECK(approx_distance(back, a, b) == raw);
  }

  TEST_CASE("diagnostics are a fraction") {
    const auto rows = build_mmd_dataset(tiny_corpus());
    TrainConfig tc;
    tc.epochs = 5;
    tc.batch_size = 4;
    const auto m = train_approximator(rows, 3, 8, tc).model;
    DiagnosticsConfig dc;
    dc.n_tests = 8;
    dc.batch = 10;
    const double f = metric_diagnostics(m, dc);
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
    CHECK(metric_diagnostics(m, dc) == f);
    dc.threshold = 1e300;
    CHECK(metric_diagnostics(m, dc) == 1.0);
  }
}
