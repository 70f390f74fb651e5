#include <doctest.h>

#include <array>
#include <queue>
#include <set>

#include "cardiosynth/phantom/phantom.hpp"

using namespace cardiosynth;
using namespace cardiosynth::phantom;

namespace {

std::array<std::size_t, 8> histogram(const LabelMap& m) {
  std::array<std::size_t, 8> h{};
  for (auto v : m.labels.values()) ++h[v];
  return h;
}

std::size_t heart_voxels(const LabelMap& m) {
  const auto h = histogram(m);
  return h[eight::RV] + h[eight::MYO] + h[eight::LV];
}

// True when some LV pixel reaches background through a 4-connected path avoiding MYO.
bool lv_leaks(const LabelMap& m, int s) {
  const Shape3 sh = m.shape();
  std::vector<char> seen(sh.slice_voxels(), 0);
  std::queue<int> q;
  for (int r = 0; r < sh.rows; ++r)
    for (int c = 0; c < sh.cols; ++c)
      if (m.labels(s, r, c) == eight::LV) {
        q.push(r * sh.cols + c);
        seen[r * sh.cols + c] = 1;
      }
  while (!q.empty()) {
    const int p = q.front();
    q.pop();
    const int r = p / sh.cols, c = p % sh.cols;
    if (m.labels(s, r, c) == eight::background) return true;
    const int nb[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (const auto& d : nb) {
      const int rr = r + d[0], cc = c + d[1];
      if (rr < 0 || cc < 0 || rr >= sh.rows || cc >= sh.cols) return true;
      const int idx = rr * sh.cols + cc;
      if (seen[idx] || m.labels(s, rr, cc) == eight::MYO) continue;
      seen[idx] = 1;
      q.push(idx);
    }
  }
  return false;
}

}  // namespace

TEST_SUITE("phantom") {
  TEST_CASE("sample_params is deterministic and respects ranges") {
    CHECK(sample_params(7) == sample_params(7));
    PhantomRanges r;
    r.heart_scale = {1.0, 1.0};
    CHECK(sample_params(3, r).heart_scale == 1.0);
    r.heart_scale = {1.2, 1.0};
    CHECK_THROWS_AS(sample_params(3, r), ConfigError);
    PhantomRanges d;
    for (std::uint64_t s = 0; s < 50; ++s) {
      const auto p = sample_params(s, d);
      CHECK(p.heart_scale >= d.heart_scale.lo);
      CHECK(p.heart_scale <= d.heart_scale.hi);
      CHECK(p.body_b_mm >= d.body_b_mm.lo);
      CHECK(p.liver_scale <= d.liver_scale.hi);
    }
  }

  TEST_CASE("33 seeds times two phases give 66 distinct parameter sets") {
    std::vector<PhantomParams> all;
    for (std::uint64_t s = 0; s < 33; ++s)
      for (Phase ph : {Phase::ED, Phase::ES}) all.push_back(sample_params(s, {}, ph));
    for (std::size_t i = 0; i < all.size(); ++i)
      for (std::size_t j = i + 1; j < all.size(); ++j) CHECK_FALSE(all[i] == all[j]);
  }

  TEST_CASE("render at 256x256 contains exactly ids 0..7") {
    const auto m = render_labels(PhantomParams{}, {10, 256, 256}, Spacing(1.3, 1.3, 10.0));
    const auto h = histogram(m);
    for (int k = 0; k < 8; ++k) CHECK(h[k] > 0);
    CHECK_NOTHROW(m.validate());
  }

  TEST_CASE("render at desk scale contains every class") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto m = render_labels(sample_params(s), {8, 64, 64}, Spacing(5.2, 5.2, 10.0));
      const auto h = histogram(m);
      for (int k = 0; k < 8; ++k) CHECK(h[k] > 0);
    }
  }

  TEST_CASE("larger heart scale grows heart classes") {
    PhantomParams p;
    p.heart_scale = 1.0;
    const auto a = render_labels(p, {10, 256, 256}, Spacing(1.3, 1.3, 10.0));
    p.heart_scale = 1.2;
    const auto b = render_labels(p, {10, 256, 256}, Spacing(1.3, 1.3, 10.0));
    const auto ha = histogram(a), hb = histogram(b);
    for (int k : {eight::RV, eight::MYO, eight::LV}) CHECK(hb[k] > ha[k]);
    CHECK(heart_voxels(b) > heart_voxels(a));
  }

  TEST_CASE("ES shrinks the LV pool for 100 random seeds") {
    for (std::uint64_t s = 0; s < 100; ++s) {
      const auto ed = render_labels(sample_params(s, {}, Phase::ED), {8, 64, 64}, Spacing(5.2, 5.2, 10.0));
      const auto es = render_labels(sample_params(s, {}, Phase::ES), {8, 64, 64}, Spacing(5.2, 5.2, 10.0));
      CHECK(histogram(es)[eight::LV] < histogram(ed)[eight::LV]);
    }
  }

  TEST_CASE("myocardium closes around the LV pool on mid-ventricular slices") {
    for (std::uint64_t seed = 0; seed < 10; ++seed)
      for (Phase ph : {Phase::ED, Phase::ES})
        for (const auto& [shape, sp] : {std::pair{Shape3{10, 256, 256}, Spacing(1.3, 1.3, 10.0)},
                                        std::pair{Shape3{8, 64, 64}, Spacing(5.2, 5.2, 10.0)}}) {
          const auto m = render_labels(sample_params(seed, {}, ph), shape, sp);
          for (int s = shape.slices / 4; s < shape.slices - shape.slices / 4; ++s) CHECK_FALSE(lv_leaks(m, s));
        }
  }

  TEST_CASE("apex-to-base tapering") {
    const auto m = render_labels(PhantomParams{}, {10, 128, 128}, Spacing(2.6, 2.6, 10.0));
    std::size_t prev = 0;
    for (int s = 0; s < 10; ++s) {
      std::size_t n = 0;
      for (auto v : m.labels.slice(s)) n += v == eight::LV;
      CHECK(n >= prev);
      prev = n;
    }
  }

  TEST_CASE("shape limits") {
    CHECK_THROWS_AS(render_labels(PhantomParams{}, {3, 64, 64}, Spacing(5.2, 5.2, 10)), ShapeError);
    CHECK_THROWS_AS(render_labels(PhantomParams{}, {8, 64, 64}, Spacing(1.0, 1.0, 10)), ShapeError);
  }

  TEST_CASE("noiseless contrast is piecewise constant") {
    const auto m = render_labels(PhantomParams{}, {6, 64, 64}, Spacing(5.2, 5.2, 10.0));
    const auto v = simulate_contrast(m, TissueSignalTable::noiseless(), 1);
    std::array<std::set<double>, 8> vals;
    for (std::size_t i = 0; i < v.voxels.size(); ++i) vals[m.labels.values()[i]].insert(v.voxels.values()[i]);
    for (const auto& s : vals) CHECK(s.size() == 1);
  }

  TEST_CASE("default contrast ordering, range, determinism") {
    const auto m = render_labels(sample_params(4), {8, 64, 64}, Spacing(5.2, 5.2, 10.0));
    const auto v = simulate_contrast(m, TissueSignalTable{}, 9);
    std::array<double, 8> sum{}, n{};
    for (std::size_t i = 0; i < v.voxels.size(); ++i) {
      sum[m.labels.values()[i]] += v.voxels.values()[i];
      n[m.labels.values()[i]] += 1;
    }
    CHECK(sum[eight::LV] / n[eight::LV] > sum[eight::MYO] / n[eight::MYO]);
    CHECK(sum[eight::MYO] / n[eight::MYO] > sum[eight::lung] / n[eight::lung]);
    const auto [lo, hi] = std::minmax_element(v.voxels.values().begin(), v.voxels.values().end());
    CHECK(*lo == -1.0);
    CHECK(*hi == 1.0);
    CHECK(v.normalized);
    const auto w = simulate_contrast(m, TissueSignalTable{}, 9);
    CHECK(w.voxels == v.voxels);
    CHECK(m.labels == render_labels(sample_params(4), {8, 64, 64}, Spacing(5.2, 5.2, 10.0)).labels);
  }

  TEST_CASE("contrast errors") {
    auto m = render_labels(PhantomParams{}, {4, 64, 64}, Spacing(5.2, 5.2, 10.0));
    TissueSignalTable t;
    t.mean.resize(6);
    t.spread.resize(6);
    CHECK_THROWS_AS(simulate_contrast(m, t, 1), ConfigError);
    m.scheme = SchemeKind::FourClass;
    CHECK_THROWS_AS(simulate_contrast(m, TissueSignalTable{}, 1), ConfigError);
  }
}
