#include "cardiosynth/augment/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cardiosynth/core/rng.hpp"

namespace cardiosynth::augment {

namespace {

double draw(Rng& r, const Interval& v) { return v.lo == v.hi ? v.lo : r.uniform(v.lo, v.hi); }

double image_min(const SlicePair& p) { return *std::min_element(p.image.begin(), p.image.end()); }

void check(const SlicePair& p) {
  if (p.rows < 1 || p.cols < 1 || p.image.size() != static_cast<std::size_t>(p.rows) * p.cols)
    throw ShapeError("slice image does not match its extent");
  if (p.has_labels() && p.labels.size() != p.image.size()) throw ShapeError("slice labels do not match the image");
}

// Samples both members at source coordinates (y, x) given per output pixel.
template <typename Map>
SlicePair warp(const SlicePair& in, Map&& source) {
  check(in);
  SlicePair out = in;
  const double fill = image_min(in);
  for (int r = 0; r < in.rows; ++r)
    for (int c = 0; c < in.cols; ++c) {
      const auto [y, x] = source(r, c);
      const std::size_t o = static_cast<std::size_t>(r) * in.cols + c;
      double v = fill;
      if (y > -1.0 && x > -1.0 && y < in.rows && x < in.cols) {
        const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
        const double fy = y - y0, fx = x - x0;
        auto at = [&](int yy, int xx) {
          return (yy < 0 || xx < 0 || yy >= in.rows || xx >= in.cols) ? fill
                                                                         : in.image[static_cast<std::size_t>(yy) * in.cols + xx];
        };
        v = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) + fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
      }
      out.image[o] = v;
      if (in.has_labels()) {
        const int yn = static_cast<int>(std::floor(y + 0.5)), xn = static_cast<int>(std::floor(x + 0.5));
        out.labels[o] = (yn < 0 || xn < 0 || yn >= in.rows || xn >= in.cols)
                            ? std::uint8_t{0}
                            : in.labels[static_cast<std::size_t>(yn) * in.cols + xn];
      }
    }
  return out;
}

}  // namespace

SlicePair affine_aug(const SlicePair& in, const AugmentConfig& cfg, std::uint64_t draw_seed) {
  Rng r(derive_seed(draw_seed, 0xAFF1ULL));
  const double s = draw(r, cfg.scale_range);
  const double theta = draw(r, cfg.rotation_deg_range) * std::numbers::pi / 180.0;
  const double cy = (in.rows - 1) / 2.0, cx = (in.cols - 1) / 2.0;
  const double co = std::cos(theta), si = std::sin(theta);
  if (s == 1.0 && theta == 0.0) {
    check(in);
    return in;
  }
  return warp(in, [&](int row, int col) {
    const double y = row - cy, x = col - cx;
    // Inverse of rotate-then-scale about the centre.
    const double sy = (co * y + si * x) / s, sx = (-si * y + co * x) / s;
    return std::pair{cy + sy, cx + sx};
  });
}

DisplacementField elastic_field(int rows, int cols, double pixel_mm, const AugmentConfig& cfg,
                                std::uint64_t draw_seed) {
  DisplacementField f;
  const double grid_px = cfg.elastic_grid_mm / pixel_mm;
  f.node_rows = static_cast<int>(std::ceil((rows - 1) / grid_px)) + 1;
  f.node_cols = static_cast<int>(std::ceil((cols - 1) / grid_px)) + 1;
  const int nr = f.node_rows, nc = f.node_cols;
  f.node_dy.assign(static_cast<std::size_t>(nr) * nc, 0.0);
  f.node_dx = f.node_dy;
  f.dy.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  f.dx = f.dy;
  if (cfg.elastic_sigma_mm == 0.0) return f;

  // White noise on a padded node grid, Gaussian-smoothed (sigma = 1 node) without boundary effects,
  // rescaled so each node component has standard deviation elastic_sigma_mm.
  const int k = 2;
  std::vector<double> w;
  double w2 = 0.0;
  for (int i = -k; i <= k; ++i)
    for (int j = -k; j <= k; ++j) {
      w.push_back(std::exp(-0.5 * (i * i + j * j)));
      w2 += w.back() * w.back();
    }
  const double norm = cfg.elastic_sigma_mm / std::sqrt(w2);
  Rng r(derive_seed(draw_seed, 0xE1A5ULL));
  const int pr = nr + 2 * k, pc = nc + 2 * k;
  for (auto* node : {&f.node_dy, &f.node_dx}) {
    std::vector<double> noise(static_cast<std::size_t>(pr) * pc);
    for (auto& v : noise) v = r.normal();
    for (int i = 0; i < nr; ++i)
      for (int j = 0; j < nc; ++j) {
        double acc = 0.0;
        std::size_t q = 0;
        for (int a = -k; a <= k; ++a)
          for (int b = -k; b <= k; ++b) acc += w[q++] * noise[static_cast<std::size_t>(i + k + a) * pc + (j + k + b)];
        (*node)[static_cast<std::size_t>(i) * nc + j] = acc * norm;
      }
  }
  for (int y = 0; y < rows; ++y) {
    const double gy = y / grid_px;
    const int i0 = std::min(static_cast<int>(gy), nr - 2 < 0 ? 0 : nr - 2);
    const double fy = nr > 1 ? gy - i0 : 0.0;
    const int i1 = std::min(i0 + 1, nr - 1);
    for (int x = 0; x < cols; ++x) {
      const double gx = x / grid_px;
      const int j0 = std::min(static_cast<int>(gx), nc - 2 < 0 ? 0 : nc - 2);
      const double fx = nc > 1 ? gx - j0 : 0.0;
      const int j1 = std::min(j0 + 1, nc - 1);
      auto lerp = [&](const std::vector<double>& n) {
        const double t = (1 - fx) * n[i0 * nc + j0] + fx * n[i0 * nc + j1];
        const double b = (1 - fx) * n[i1 * nc + j0] + fx * n[i1 * nc + j1];
        return ((1 - fy) * t + fy * b) / pixel_mm;
      };
      f.dy[static_cast<std::size_t>(y) * cols + x] = lerp(f.node_dy);
      f.dx[static_cast<std::size_t>(y) * cols + x] = lerp(f.node_dx);
    }
  }
  return f;
}

SlicePair elastic_aug(const SlicePair& in, const AugmentConfig& cfg, std::uint64_t draw_seed) {
  check(in);
  const auto f = elastic_field(in.rows, in.cols, in.pixel_mm, cfg, draw_seed);
  return warp(in, [&](int r, int c) {
    const std::size_t o = static_cast<std::size_t>(r) * in.cols + c;
    return std::pair{r + f.dy[o], c + f.dx[o]};
  });
}

SlicePair flip_horizontal(const SlicePair& in) {
  check(in);
  SlicePair out = in;
  for (int r = 0; r < in.rows; ++r) {
    const std::size_t row = static_cast<std::size_t>(r) * in.cols;
    std::reverse(out.image.begin() + row, out.image.begin() + row + in.cols);
    if (in.has_labels()) std::reverse(out.labels.begin() + row, out.labels.begin() + row + in.cols);
  }
  return out;
}

SlicePair mirror_aug(const SlicePair& in, const AugmentConfig& cfg, std::uint64_t draw_seed) {
  Rng r(derive_seed(draw_seed, 0x3133ULL));
  if (r.uniform() < cfg.mirror_prob) return flip_horizontal(in);
  check(in);
  return in;
}

SlicePair apply_gamma(const SlicePair& in, double gamma) {
  check(in);
  if (!(gamma > 0)) throw ConfigError("gamma must be > 0");
  SlicePair out = in;
  for (double& v : out.image) {
    const double u = std::clamp((v + 1.0) / 2.0, 0.0, 1.0);
    v = 2.0 * std::pow(u, gamma) - 1.0;
  }
  return out;
}

SlicePair gamma_aug(const SlicePair& in, const AugmentConfig& cfg, std::uint64_t draw_seed) {
  Rng r(derive_seed(draw_seed, 0x6A3AULL));
  return apply_gamma(in, draw(r, cfg.gamma_range));
}

SlicePair crop_nonzero(const SlicePair& in, int out_size) {
  check(in);
  const double mn = image_min(in);
  int r0 = in.rows, r1 = -1, c0 = in.cols, c1 = -1;
  for (int r = 0; r < in.rows; ++r)
    for (int c = 0; c < in.cols; ++c)
      if (in.image[static_cast<std::size_t>(r) * in.cols + c] > mn) {
        r0 = std::min(r0, r);
        r1 = std::max(r1, r);
        c0 = std::min(c0, c);
        c1 = std::max(c1, c);
      }
  if (r1 < 0) return in;
  const int h = r1 - r0 + 1, w = c1 - c0 + 1;
  SlicePair out;
  out.rows = out_size;
  out.cols = out_size;
  out.pixel_mm = in.pixel_mm;
  out.image.assign(static_cast<std::size_t>(out_size) * out_size, mn);
  if (in.has_labels()) out.labels.assign(out.image.size(), 0);
  // Centred crop/pad of the box, extra pixel trailing.
  const int sr = h > out_size ? (h - out_size) / 2 : -((out_size - h) / 2);
  const int sc = w > out_size ? (w - out_size) / 2 : -((out_size - w) / 2);
  for (int r = 0; r < out_size; ++r) {
    const int br = r + sr;
    if (br < 0 || br >= h) continue;
    for (int c = 0; c < out_size; ++c) {
      const int bc = c + sc;
      if (bc < 0 || bc >= w) continue;
      const std::size_t src = static_cast<std::size_t>(r0 + br) * in.cols + (c0 + bc);
      const std::size_t dst = static_cast<std::size_t>(r) * out_size + c;
      out.image[dst] = in.image[src];
      if (in.has_labels()) out.labels[dst] = in.labels[src];
    }
  }
  return out;
}

PipelineKind pipeline_kind_from_string(std::string_view s) {
  if (s == "net1") return PipelineKind::net1;
  if (s == "net3") return PipelineKind::net3;
  if (s == "gan") return PipelineKind::gan;
  throw ConfigError("unknown augmentation pipeline kind '" + std::string(s) + "'");
}

std::vector<AugmentOp> build_pipeline(PipelineKind kind, const AugmentConfig& cfg) {
  std::vector<AugmentOp> menu;
  switch (kind) {
    case PipelineKind::net1:
      menu = {AugmentOp::affine, AugmentOp::elastic, AugmentOp::mirror};
      break;
    case PipelineKind::net3:
      menu = {AugmentOp::affine, AugmentOp::elastic, AugmentOp::mirror, AugmentOp::gamma, AugmentOp::crop_nonzero};
      break;
    case PipelineKind::gan:
      menu = {AugmentOp::affine, AugmentOp::elastic};
      break;
  }
  std::erase_if(menu, [&](AugmentOp op) { return !cfg.enabled_ops.contains(op); });
  return menu;
}

SlicePair apply_pipeline(const std::vector<AugmentOp>& ops, const SlicePair& in, const AugmentConfig& cfg,
                         std::uint64_t draw_seed) {
  SlicePair cur = in;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const std::uint64_t s = derive_seed(cfg.seed, draw_seed, i);
    switch (ops[i]) {
      case AugmentOp::affine:
        cur = affine_aug(cur, cfg, s);
        break;
      case AugmentOp::elastic:
        cur = elastic_aug(cur, cfg, s);
        break;
      case AugmentOp::mirror:
        cur = mirror_aug(cur, cfg, s);
        break;
      case AugmentOp::gamma:
        cur = gamma_aug(cur, cfg, s);
        break;
      case AugmentOp::crop_nonzero:
        cur = crop_nonzero(cur, in.rows);
        break;
    }
  }
  return cur;
}

}  // namespace cardiosynth::augment
