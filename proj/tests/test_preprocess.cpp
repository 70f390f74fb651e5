#include <doctest.h>

#include <cmath>
#include <set>

#include "cardiosynth/core/log.hpp"
#include "cardiosynth/core/rng.hpp"
#include "cardiosynth/phantom/phantom.hpp"
#include "cardiosynth/preprocess/preprocess.hpp"

using namespace cardiosynth;
using namespace cardiosynth::preprocess;

namespace {

Volume make_volume(Shape3 sh, Spacing sp, double fill = 0.0) {
  Volume v;
  v.voxels = Grid3<double>(sh, fill);
  v.spacing = sp;
  return v;
}

LabelMap make_labels(Shape3 sh, Spacing sp, SchemeKind k, std::uint8_t fill = 0) {
  LabelMap m;
  m.labels = Grid3<std::uint8_t>(sh, fill);
  m.spacing = sp;
  m.scheme = k;
  return m;
}

}  // namespace

TEST_SUITE("preprocess") {
  TEST_CASE("resample size arithmetic and spacing") {
    const auto v = resample_inplane(make_volume({2, 128, 128}, Spacing(2.6, 2.6, 8.0), 3.0));
    CHECK(v.shape() == Shape3{2, 256, 256});
    CHECK(v.spacing == Spacing(1.3, 1.3, 8.0));
    for (double x : v.voxels.values()) CHECK(x == doctest::Approx(3.0).epsilon(1e-12));
    const auto n = resample_inplane(make_volume({1, 100, 50}, Spacing(1.0, 2.0, 8.0), -2.0), 1.3, Interp::nearest);
    CHECK(n.shape() == Shape3{1, 77, 77});
    for (double x : n.voxels.values()) CHECK(x == -2.0);
    CHECK_THROWS_AS(interp_from_string("cubic"), ConfigError);
    CHECK_THROWS_AS(resample_inplane(make_volume({1, 1, 1}, Spacing(0.1, 0.1, 1.0)), 1.3), ShapeError);
  }

  TEST_CASE("linear resampling matches a bilinear oracle") {
    const int R = 40, C = 30;
    auto v = make_volume({1, R, C}, Spacing(2.0, 1.7, 5.0));
    Rng rng(5);
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < C; ++c) v.voxels(0, r, c) = 0.3 * r - 0.7 * c + 0.05 * r * c + rng.uniform();
    const auto out = resample_inplane(v, 1.3);
    for (int k = 0; k < 20; ++k) {
      const int r = static_cast<int>(rng.below(out.shape().rows)), c = static_cast<int>(rng.below(out.shape().cols));
      double y = (r + 0.5) * 1.3 / 2.0 - 0.5, x = (c + 0.5) * 1.3 / 1.7 - 0.5;
      y = std::min(std::max(y, 0.0), R - 1.0);
      x = std::min(std::max(x, 0.0), C - 1.0);
      const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
      const int y1 = std::min(y0 + 1, R - 1), x1 = std::min(x0 + 1, C - 1);
      const double wy = y - y0, wx = x - x0;
      const double ref = (1 - wy) * ((1 - wx) * v.voxels(0, y0, x0) + wx * v.voxels(0, y0, x1)) +
                         wy * ((1 - wx) * v.voxels(0, y1, x0) + wx * v.voxels(0, y1, x1));
      CHECK(std::abs(out.voxels(0, r, c) - ref) < 1e-6);
    }
  }

  TEST_CASE("nearest resampling never introduces label ids") {
    auto m = phantom::render_labels(phantom::sample_params(2), {6, 64, 64}, Spacing(5.2, 5.2, 10.0));
    m.labels(0, 0, 0) = eight::liver;
    std::set<int> before(m.labels.values().begin(), m.labels.values().end());
    const auto r = resample_inplane(m, 1.3);
    CHECK(r.shape() == Shape3{6, 256, 256});
    for (auto v : r.labels.values()) CHECK(before.count(v) == 1);
    CHECK_THROWS_AS(resample_inplane(m, 1.3, Interp::linear), ConfigError);
  }

  TEST_CASE("centre crop and pad") {
    auto v = make_volume({1, 300, 300}, Spacing(1.3, 1.3, 1.0));
    for (int r = 0; r < 300; ++r)
      for (int c = 0; c < 300; ++c) v.voxels(0, r, c) = r * 1000 + c;
    CHECK(crop_offset(300, 256) == 22);
    const auto cr = center_crop_or_pad(v);
    CHECK(cr.shape() == Shape3{1, 256, 256});
    CHECK(cr.voxels(0, 0, 0) == 22 * 1000 + 22);
    const auto same = center_crop_or_pad(cr);
    CHECK(same.voxels == cr.voxels);
    CHECK(crop_offset(257, 256) == 0);

    auto m = make_labels({1, 200, 200}, Spacing(1.3, 1.3, 1.0), SchemeKind::FourClass, four::LV);
    const auto p = center_crop_or_pad(m);
    CHECK(pad_before(200, 256) == 28);
    for (int r = 0; r < 256; ++r)
      for (int c = 0; c < 256; ++c) {
        const bool inside = r >= 28 && r < 228 && c >= 28 && c < 228;
        CHECK(p.labels(0, r, c) == (inside ? four::LV : four::background));
      }
    auto small = make_volume({1, 2, 2}, Spacing(1, 1, 1), 4.0);
    small.voxels(0, 0, 0) = -3.0;
    const auto sp = center_crop_or_pad(small, 5);
    CHECK(sp.voxels(0, 0, 0) == -3.0);
    CHECK(sp.voxels(0, 1, 1) == -3.0);
    CHECK(sp.voxels(0, 2, 2) == 4.0);
  }

  TEST_CASE("min-max normalization") {
    auto v = make_volume({1, 1, 3}, Spacing(1, 1, 1));
    v.voxels.values() = {0.0, 100.0, 200.0};
    const auto n = normalize_minmax(v);
    CHECK(n.voxels.values() == std::vector<double>{-1.0, 0.0, 1.0});
    CHECK(n.normalized);
    auto w = make_volume({1, 2, 3}, Spacing(1, 1, 1));
    w.voxels.values() = {-1.0, -0.3, 0.2, 0.7, 0.99, 1.0};
    const auto wn = normalize_minmax(w);
    for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(wn.voxels.values()[i] - w.voxels.values()[i]) < 1e-12);
    const long before = log::warning_count();
    bool degenerate = false;
    const auto z = normalize_minmax(make_volume({1, 4, 4}, Spacing(1, 1, 1), 5.0), &degenerate);
    CHECK(degenerate);
    CHECK(log::warning_count() == before + 1);
    for (double x : z.voxels.values()) CHECK(x == 0.0);
  }

  TEST_CASE("to_four_class") {
    auto liver = make_labels({1, 4, 4}, Spacing(1, 1, 1), SchemeKind::EightClass, eight::liver);
    const auto collapsed = to_four_class(liver);
    for (auto x : collapsed.labels.values()) CHECK(x == four::background);
    const auto m = phantom::render_labels(phantom::sample_params(1), {6, 64, 64}, Spacing(5.2, 5.2, 10.0));
    const auto f = to_four_class(m);
    CHECK(f.scheme == SchemeKind::FourClass);
    std::array<std::size_t, 8> h8{};
    std::array<std::size_t, 4> h4{};
    for (auto x : m.labels.values()) ++h8[x];
    for (auto x : f.labels.values()) {
      CHECK(x < 4);
      ++h4[x];
    }
    CHECK(h4[four::RV] == h8[eight::RV]);
    CHECK(h4[four::MYO] == h8[eight::MYO]);
    CHECK(h4[four::LV] == h8[eight::LV]);
    CHECK_THROWS_AS(to_four_class(f), ConfigError);
  }

  TEST_CASE("merge_heart_labels rules") {
    auto pred = make_labels({1, 9, 9}, Spacing(1, 1, 1), SchemeKind::EightClass, eight::lung);
    auto ann = make_labels({1, 9, 9}, Spacing(1, 1, 1), SchemeKind::FourClass);
    for (int r = 0; r < 9; ++r)
      for (int c = 0; c < 9; ++c)
        if ((r - 4) * (r - 4) + (c - 4) * (c - 4) <= 4) ann.labels(0, r, c) = four::LV;
    const auto m = merge_heart_labels(pred, ann);
    for (int r = 0; r < 9; ++r)
      for (int c = 0; c < 9; ++c)
        CHECK(m.labels(0, r, c) == (ann.labels(0, r, c) == four::LV ? eight::LV : eight::lung));

    auto stray = make_labels({1, 3, 3}, Spacing(1, 1, 1), SchemeKind::EightClass, eight::lung);
    stray.labels(0, 1, 1) = eight::MYO;
    const auto s = merge_heart_labels(stray, make_labels({1, 3, 3}, Spacing(1, 1, 1), SchemeKind::FourClass));
    CHECK(s.labels(0, 1, 1) == eight::body);

    const auto ph = phantom::render_labels(phantom::sample_params(8), {6, 64, 64}, Spacing(5.2, 5.2, 10.0));
    const auto a = to_four_class(ph);
    CHECK(merge_heart_labels(ph, a).labels == ph.labels);
    // Idempotence and heart agreement on random maps.
    Rng rng(4);
    auto rp = make_labels({2, 8, 8}, Spacing(1, 1, 1), SchemeKind::EightClass);
    auto ra = make_labels({2, 8, 8}, Spacing(1, 1, 1), SchemeKind::FourClass);
    for (auto& x : rp.labels.values()) x = static_cast<std::uint8_t>(rng.below(8));
    for (auto& x : ra.labels.values()) x = static_cast<std::uint8_t>(rng.below(4));
    const auto once = merge_heart_labels(rp, ra);
    CHECK(merge_heart_labels(once, ra).labels == once.labels);
    CHECK(to_four_class(once).labels == ra.labels);
    CHECK_THROWS_AS(merge_heart_labels(rp, make_labels({2, 8, 7}, Spacing(1, 1, 1), SchemeKind::FourClass)),
                    ShapeError);
  }

  TEST_CASE("one-hot encoding") {
    auto m = make_labels({1, 1, 1}, Spacing(1, 1, 1), SchemeKind::EightClass, 3);
    const auto oh = one_hot(m, 8);
    for (int k = 0; k < 8; ++k) CHECK(oh[k] == (k == 3 ? 1.0f : 0.0f));
    Rng rng(3);
    auto r = make_labels({2, 5, 7}, Spacing(1, 1, 1), SchemeKind::EightClass);
    for (auto& x : r.labels.values()) x = static_cast<std::uint8_t>(rng.below(8));
    const auto h = one_hot(r, 8);
    const std::size_t plane = 35;
    for (int s = 0; s < 2; ++s)
      for (std::size_t i = 0; i < plane; ++i) {
        float sum = 0.0f;
        int arg = 0;
        for (int k = 0; k < 8; ++k) {
          const float v = h[(s * 8 + k) * plane + i];
          sum += v;
          if (v > h[(s * 8 + arg) * plane + i]) arg = k;
        }
        CHECK(sum == 1.0f);
        CHECK(arg == r.labels.slice(s)[i]);
      }
    CHECK_THROWS_AS(one_hot(r, 4), ShapeError);
  }

  TEST_CASE("prepare_pair keeps image and labels aligned") {
    const auto lab = phantom::render_labels(phantom::sample_params(6), {4, 96, 96}, Spacing(3.5, 3.5, 10.0));
    const auto img = phantom::simulate_contrast(lab, phantom::TissueSignalTable::noiseless(), 2);
    const auto p = prepare_pair(img, lab, 5.2, 64);
    CHECK(p.image.shape() == Shape3{4, 64, 64});
    CHECK(p.labels.shape() == p.image.shape());
    const auto pn = prepare_pair(resample_inplane(img, 3.5, Interp::nearest), lab, 3.5, 64);
    std::array<std::set<double>, 8> exact;
    for (std::size_t i = 0; i < pn.image.voxels.size(); ++i)
      exact[pn.labels.labels.values()[i]].insert(pn.image.voxels.values()[i]);
    for (const auto& s : exact) CHECK(s.size() <= 1);
  }
}
