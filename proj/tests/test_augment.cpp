#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "cardiosynth/augment/augment.hpp"
#include "cardiosynth/core/rng.hpp"
#include "cardiosynth/phantom/phantom.hpp"

using namespace cardiosynth;
using namespace cardiosynth::augment;

namespace {

SlicePair phantom_slice(std::uint64_t seed, bool noiseless = true, int size = 64) {
  const double mm = 5.2 * 64 / size;
  const auto lab = phantom::render_labels(phantom::sample_params(seed), {8, size, size}, Spacing(mm, mm, 10.0));
  const auto img = phantom::simulate_contrast(
      lab, noiseless ? phantom::TissueSignalTable::noiseless() : phantom::TissueSignalTable{}, seed);
  SlicePair p;
  p.rows = size;
  p.cols = size;
  p.pixel_mm = mm;
  const auto s = img.voxels.slice(4);
  p.image.assign(s.begin(), s.end());
  const auto l = lab.labels.slice(4);
  p.labels.assign(l.begin(), l.end());
  return p;
}

AugmentConfig fixed(double scale, double rot) {
  AugmentConfig c;
  c.scale_range = {scale, scale};
  c.rotation_deg_range = {rot, rot};
  return c;
}

std::array<double, 8> class_means(const SlicePair& p) {
  std::array<double, 8> s{}, n{};
  for (std::size_t i = 0; i < p.image.size(); ++i) {
    s[p.labels[i]] += p.image[i];
    n[p.labels[i]] += 1;
  }
  for (int k = 0; k < 8; ++k) s[k] = n[k] > 0 ? s[k] / n[k] : NAN;
  return s;
}

std::set<int> ids(const SlicePair& p) { return {p.labels.begin(), p.labels.end()}; }

}  // namespace

TEST_SUITE("augment") {
  TEST_CASE("affine identity and determinism") {
    const auto p = phantom_slice(1, false);
    const auto id = affine_aug(p, fixed(1.0, 0.0), 3);
    for (std::size_t i = 0; i < p.image.size(); ++i) CHECK(std::abs(id.image[i] - p.image[i]) < 1e-6);
    CHECK(id.labels == p.labels);
    const AugmentConfig d;
    CHECK(affine_aug(p, d, 11) == affine_aug(p, d, 11));
    CHECK_FALSE(affine_aug(p, d, 11) == affine_aug(p, d, 12));
  }

  TEST_CASE("180 degree rotation maps a point to its central mirror") {
    for (auto [rows, cols] : {std::pair{9, 9}, std::pair{8, 12}}) {
      SlicePair p;
      p.rows = rows;
      p.cols = cols;
      p.image.assign(rows * cols, -1.0);
      p.labels.assign(rows * cols, 0);
      const int r = 2, c = 1;
      p.labels[r * cols + c] = 3;
      p.image[r * cols + c] = 1.0;
      const auto out = affine_aug(p, fixed(1.0, 180.0), 0);
      for (int y = 0; y < rows; ++y)
        for (int x = 0; x < cols; ++x)
          CHECK(out.labels[y * cols + x] == ((y == rows - 1 - r && x == cols - 1 - c) ? 3 : 0));
      CHECK(out.image[(rows - 1 - r) * cols + (cols - 1 - c)] == doctest::Approx(1.0));
    }
  }

  TEST_CASE("elastic: zero field is identity, ids preserved, displacement statistic") {
    const auto p = phantom_slice(2);
    AugmentConfig z;
    z.elastic_sigma_mm = 0.0;
    CHECK(elastic_aug(p, z, 5) == p);

    AugmentConfig c;
    c.elastic_grid_mm = 40.0;
    c.elastic_sigma_mm = 6.0;
    const auto before = ids(p);
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto w = elastic_aug(p, c, s);
      for (int v : ids(w)) CHECK(before.count(v) == 1);
    }
    // Node displacement vectors are isotropic Gaussians: E|d| = sigma * sqrt(pi / 2).
    double sum = 0.0, sum2 = 0.0;
    int n = 0;
    for (std::uint64_t s = 0; s < 50; ++s) {
      const auto f = elastic_field(64, 64, 5.2, c, s);
      for (std::size_t i = 0; i < f.node_dx.size(); ++i) {
        const double m = std::hypot(f.node_dx[i], f.node_dy[i]);
        sum += m;
        sum2 += m * m;
        ++n;
      }
    }
    const double mean = sum / n;
    const double expected = c.elastic_sigma_mm * std::sqrt(std::numbers::pi / 2.0);
    const double sd = std::sqrt(sum2 / n - mean * mean);
    // Neighbouring nodes are correlated; draws are not, so use the per-draw count for the error.
    const double se = sd / std::sqrt(50.0);
    CHECK(std::abs(mean - expected) < 3 * se);
  }

  TEST_CASE("mirror") {
    const auto p = phantom_slice(3);
    AugmentConfig c;
    c.mirror_prob = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) CHECK(mirror_aug(p, c, s) == p);
    c.mirror_prob = 1.0;
    CHECK(mirror_aug(mirror_aug(p, c, 1), c, 2) == p);
    const auto f = flip_horizontal(p);
    for (int r = 0; r < p.rows; ++r)
      for (int col = 0; col < p.cols; ++col) CHECK(f.labels[r * p.cols + col] == p.labels[r * p.cols + p.cols - 1 - col]);
    CHECK_FALSE(f == p);
  }

  TEST_CASE("gamma") {
    auto p = phantom_slice(4, false);
    AugmentConfig c;
    c.gamma_range = {1.0, 1.0};
    const auto g1 = gamma_aug(p, c, 0);
    for (std::size_t i = 0; i < p.image.size(); ++i) CHECK(std::abs(g1.image[i] - p.image[i]) < 1e-9);
    SlicePair mid;
    mid.rows = mid.cols = 1;
    mid.image = {0.0};
    CHECK((apply_gamma(mid, 2.0).image[0] + 1.0) / 2.0 == doctest::Approx(0.25));
    const auto g = gamma_aug(p, AugmentConfig{}, 9);
    std::vector<std::size_t> a(p.image.size()), b(p.image.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = b[i] = i;
    std::stable_sort(a.begin(), a.end(), [&](auto x, auto y) { return p.image[x] < p.image[y]; });
    std::stable_sort(b.begin(), b.end(), [&](auto x, auto y) { return g.image[x] < g.image[y]; });
    CHECK(a == b);
    CHECK(g.labels == p.labels);
  }

  TEST_CASE("crop_nonzero") {
    SlicePair p;
    p.rows = p.cols = 256;
    p.image.assign(256 * 256, -1.0);
    p.labels.assign(256 * 256, 0);
    for (int r = 50; r <= 200; ++r)
      for (int c = 30; c <= 100; ++c) {
        p.image[r * 256 + c] = 0.5;
        p.labels[r * 256 + c] = 2;
      }
    p.labels[10 * 256 + 10] = 1;  // outside the content box
    const auto out = crop_nonzero(p, 256);
    // Box 151 x 71 padded to 256: leading pads 52 and 92.
    int inside = 0;
    for (int r = 0; r < 256; ++r)
      for (int c = 0; c < 256; ++c) {
        const bool in_box = r >= 52 && r < 52 + 151 && c >= 92 && c < 92 + 71;
        CHECK(out.image[r * 256 + c] == (in_box ? 0.5 : -1.0));
        inside += out.labels[r * 256 + c] == 2;
        CHECK(out.labels[r * 256 + c] != 1);
      }
    CHECK(inside == 151 * 71);
    SlicePair full;
    full.rows = full.cols = 8;
    Rng rng(1);
    for (int i = 0; i < 64; ++i) full.image.push_back(rng.uniform());
    full.image[0] = -2.0;
    full.image[63] = -2.0;
    full.image[7] = -2.0;
    full.image[56] = -2.0;
    full.image[1] = full.image[8] = 0.5;
    full.image[62] = full.image[55] = 0.5;
    CHECK(crop_nonzero(full, 8) == full);
    SlicePair flat;
    flat.rows = flat.cols = 4;
    flat.image.assign(16, 0.3);
    CHECK(crop_nonzero(flat, 8) == flat);
  }

  TEST_CASE("pipeline menus") {
    const AugmentConfig c;
    const auto n1 = build_pipeline(PipelineKind::net1, c);
    CHECK(n1 == std::vector<AugmentOp>{AugmentOp::affine, AugmentOp::elastic, AugmentOp::mirror});
    const auto n3 = build_pipeline(PipelineKind::net3, c);
    CHECK(n3.size() == 5);
    CHECK(std::count(n3.begin(), n3.end(), AugmentOp::gamma) == 1);
    CHECK(std::count(n3.begin(), n3.end(), AugmentOp::crop_nonzero) == 1);
    CHECK(build_pipeline(PipelineKind::gan, c) == std::vector<AugmentOp>{AugmentOp::affine, AugmentOp::elastic});
    CHECK_THROWS_AS(pipeline_kind_from_string("net2"), ConfigError);
  }

  TEST_CASE("geometric ops keep image/label alignment") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto p = phantom_slice(seed, true, 256);
      const auto before = class_means(p);
      const AugmentConfig c;
      const std::vector<AugmentOp> geo{AugmentOp::affine, AugmentOp::elastic, AugmentOp::mirror};
      for (std::uint64_t d = 0; d < 5; ++d) {
        const auto t = apply_pipeline(geo, p, c, d);
        const auto after = class_means(t);
        for (int k = 0; k < 8; ++k) {
          if (std::isnan(after[k]) || std::isnan(before[k])) continue;
          const double span = 2.0;  // image range
          CHECK(std::abs(after[k] - before[k]) < 0.1 * span);
        }
        for (int v : ids(t)) CHECK(ids(p).count(v) == 1);
      }
    }
  }

  TEST_CASE("distinct draws differ") {
    const auto p = phantom_slice(7, false);
    const AugmentConfig c;
    const auto ops = build_pipeline(PipelineKind::net1, c);
    std::set<std::vector<double>> seen;
    for (std::uint64_t d = 0; d < 30; ++d) seen.insert(apply_pipeline(ops, p, c, d).image);
    CHECK(seen.size() == 30);
    CHECK(apply_pipeline(ops, p, c, 4) == apply_pipeline(ops, p, c, 4));
  }
}
