#include <doctest.h>

#include <cmath>
#include <vector>

#include "cardiosynth/core/error.hpp"
#include "cardiosynth/core/rng.hpp"
#include "cardiosynth/metrics/metrics.hpp"
#include "support/metric_oracles.hpp"

using namespace cardiosynth;
using namespace cardiosynth::metrics;

namespace {

Grid3<std::uint8_t> random_mask(Shape3 s, Rng& r, double p) {
  Grid3<std::uint8_t> m(s);
  for (auto& v : m.values()) v = r.uniform() < p;
  return m;
}

LabelMap four_map(Shape3 s) {
  LabelMap m;
  m.labels = Grid3<std::uint8_t>(s);
  m.scheme = SchemeKind::FourClass;
  m.spacing = Spacing(1.3, 1.3, 8.0);
  m.subject_id = "s0";
  m.phase = Phase::ED;
  return m;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("dice examples") {
    Grid3<std::uint8_t> p(Shape3{1, 2, 2}), g(Shape3{1, 2, 2});
    p(0, 0, 0) = p(0, 0, 1) = 1;
    g(0, 0, 1) = g(0, 1, 1) = 1;
    CHECK(dice_masks(p, g) == 0.5);
    CHECK(dice_masks(p, p) == 1.0);
    Grid3<std::uint8_t> e(Shape3{1, 2, 2});
    CHECK(dice_masks(e, e) == 1.0);
    CHECK(dice_masks(e, p) == 0.0);
    CHECK_THROWS_AS(dice_masks(p, Grid3<std::uint8_t>(Shape3{1, 2, 3})), ShapeError);
  }

  TEST_CASE("hausdorff examples and conventions") {
    Grid3<std::uint8_t> a(Shape3{1, 4, 6}), b(Shape3{1, 4, 6});
    a(0, 1, 1) = 1;
    b(0, 1, 4) = 1;
    const Spacing sp(1.3, 1.3, 1.3);
    CHECK(hausdorff_masks(a, b, sp) == doctest::Approx(3.9).epsilon(1e-12));
    CHECK(hausdorff_masks(a, a, sp) == 0.0);
    Grid3<std::uint8_t> e(Shape3{1, 4, 6});
    CHECK(hausdorff_masks(e, e, sp) == 0.0);
    CHECK(hausdorff_masks(a, e, sp) == doctest::Approx(image_diagonal_mm(a.shape(), sp)));
  }

  TEST_CASE("random 16^3 masks match brute force") {
    Rng r(1);
    for (int seed = 0; seed < 100; ++seed) {
      const double pa = 0.002 + 0.05 * r.uniform(), pb = 0.002 + 0.05 * r.uniform();
      auto a = random_mask({16, 16, 16}, r, pa), b = random_mask({16, 16, 16}, r, pb);
      const Spacing sp(0.5 + r.uniform(), 0.5 + r.uniform(), 1.0 + 4.0 * r.uniform());
      CHECK(std::abs(dice_masks(a, b) - testsupport::brute_dice(a, b)) < 1e-9);
      CHECK(std::abs(hausdorff_masks(a, b, sp) - testsupport::brute_hausdorff(a, b, sp)) < 1e-9);
    }
  }

  TEST_CASE("exhaustive agreement on small masks") {
    const Spacing sp(1.3, 0.9, 2.5);
    int failures = 0;
    for (Shape3 s : {Shape3{2, 2, 2}, Shape3{1, 2, 4}, Shape3{1, 1, 8}, Shape3{2, 1, 4}}) {
      const int n = static_cast<int>(s.voxels());
      for (int ma = 0; ma < (1 << n); ++ma)
        for (int mb = 0; mb < (1 << n); ++mb) {
          Grid3<std::uint8_t> a(s), b(s);
          for (int i = 0; i < n; ++i) {
            a.values()[i] = (ma >> i) & 1;
            b.values()[i] = (mb >> i) & 1;
          }
          failures += std::abs(dice_masks(a, b) - testsupport::brute_dice(a, b)) > 1e-9;
          failures += std::abs(hausdorff_masks(a, b, sp) - testsupport::brute_hausdorff(a, b, sp)) > 1e-9;
        }
    }
    CHECK(failures == 0);
    Rng r(2);
    for (int trial = 0; trial < 2000; ++trial) {
      auto a = random_mask({4, 4, 4}, r, r.uniform()), b = random_mask({4, 4, 4}, r, r.uniform());
      failures += std::abs(dice_masks(a, b) - testsupport::brute_dice(a, b)) > 1e-9;
      failures += std::abs(hausdorff_masks(a, b, sp) - testsupport::brute_hausdorff(a, b, sp)) > 1e-9;
    }
    CHECK(failures == 0);
  }

  TEST_CASE("metric properties") {
    Rng r(3);
    for (int trial = 0; trial < 30; ++trial) {
      auto a = random_mask({6, 10, 10}, r, 0.05), b = random_mask({6, 10, 10}, r, 0.05),
           c = random_mask({6, 10, 10}, r, 0.05);
      const Spacing sp(1.3, 1.3, 3.0), sp2(2.6, 2.6, 6.0);
      CHECK(dice_masks(a, b) == dice_masks(b, a));
      CHECK(dice_masks(a, b) >= 0.0);
      CHECK(dice_masks(a, b) <= 1.0);
      CHECK(hausdorff_masks(a, b, sp) == hausdorff_masks(b, a, sp));
      CHECK(hausdorff_masks(a, b, sp2) == doctest::Approx(2.0 * hausdorff_masks(a, b, sp)).epsilon(1e-12));
      const double slack = 2.0 * std::hypot(1.3, 1.3, 3.0);
      CHECK(hausdorff_masks(a, c, sp) <= hausdorff_masks(a, b, sp) + hausdorff_masks(b, c, sp) + slack);
    }
  }

  TEST_CASE("hd95 and per-slice variants") {
    Grid3<std::uint8_t> a(Shape3{2, 8, 8}), b(Shape3{2, 8, 8});
    a(0, 2, 2) = b(0, 2, 3) = 1;
    a(1, 4, 4) = b(1, 4, 4) = 1;
    const Spacing sp(1.0, 1.0, 10.0);
    CHECK(hausdorff_masks(a, b, sp, {100.0, true}) == doctest::Approx(1.0));
    CHECK(hausdorff_masks(a, b, sp, {50.0, false}) <= hausdorff_masks(a, b, sp));
  }

  TEST_CASE("evaluate and aggregate") {
    LabelMap gt = four_map({3, 16, 16});
    for (int k = 0; k < 3; ++k)
      for (int y = 4; y < 12; ++y)
        for (int x = 4; x < 12; ++x) gt.labels(k, y, x) = (y < 7) ? four::RV : (x < 8 ? four::MYO : four::LV);
    auto rows = evaluate(gt, gt);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].cls == HeartClass::LV);
    for (const auto& r : rows) {
      CHECK(r.dsc == 1.0);
      CHECK(r.hd_mm == 0.0);
      CHECK(r.subject_id == "s0");
    }
    LabelMap pred = gt;
    pred.labels(1, 10, 10) = four::background;
    auto rows2 = evaluate(pred, gt);
    CHECK(rows2[0].dsc < 1.0);
    CHECK(rows2[1] == rows[1]);
    CHECK(rows2[2] == rows[2]);

    LabelMap eight = gt;
    eight.scheme = SchemeKind::EightClass;
    CHECK_THROWS_AS(evaluate(eight, gt), ConfigError);

    std::vector<MetricsRow> cohort{{"a", Phase::ED, HeartClass::LV, 0.9, 4.0},
                                   {"b", Phase::ES, HeartClass::LV, 1.0, 2.0}};
    auto agg = aggregate(cohort);
    REQUIRE(agg.size() == 1);
    CHECK(agg[0].mean_dsc == doctest::Approx(0.95));
    CHECK(agg[0].mean_hd_mm == doctest::Approx(3.0));
    CHECK(aggregate({cohort[0]})[0].mean_dsc == 0.9);
    CHECK_THROWS_AS(aggregate({}), ValueError);

    auto rep = make_report(rows2);
    CHECK(report_from_json(to_json(rep)) == rep);
  }
}
