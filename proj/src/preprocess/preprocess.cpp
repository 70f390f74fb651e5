#include "cardiosynth/preprocess/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "cardiosynth/core/log.hpp"

namespace cardiosynth::preprocess {

namespace {

int resampled_size(int n, double old_mm, double target_mm) {
  const int m = static_cast<int>(std::lround(n * old_mm / target_mm));
  if (m < 1) throw ShapeError("resampling gives a zero-size result");
  return m;
}

// Source coordinate of output pixel i under pixel-centre alignment.
double source_coord(int i, double target_mm, double old_mm) { return (i + 0.5) * target_mm / old_mm - 0.5; }

template <typename T, typename Sample>
Grid3<T> resample_grid(const Grid3<T>& in, int rows, int cols, Sample&& sample) {
  const Shape3 sh = in.shape();
  Grid3<T> out(Shape3{sh.slices, rows, cols});
  for (int s = 0; s < sh.slices; ++s)
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) out(s, r, c) = sample(s, r, c);
  return out;
}

template <typename T>
Grid3<T> crop_pad_grid(const Grid3<T>& in, int size, T fill) {
  const Shape3 sh = in.shape();
  Grid3<T> out(Shape3{sh.slices, size, size}, fill);
  // Source index = destination index + shift.
  const int dr = sh.rows >= size ? crop_offset(sh.rows, size) : -pad_before(sh.rows, size);
  const int dc = sh.cols >= size ? crop_offset(sh.cols, size) : -pad_before(sh.cols, size);
  for (int s = 0; s < sh.slices; ++s)
    for (int r = 0; r < size; ++r) {
      const int sr = r + dr;
      if (sr < 0 || sr >= sh.rows) continue;
      for (int c = 0; c < size; ++c) {
        const int sc = c + dc;
        if (sc < 0 || sc >= sh.cols) continue;
        out(s, r, c) = in(s, sr, sc);
      }
    }
  return out;
}

}  // namespace

Interp interp_from_string(std::string_view s) {
  if (s == "linear") return Interp::linear;
  if (s == "nearest") return Interp::nearest;
  throw ConfigError("unknown interpolation mode '" + std::string(s) + "'");
}

Volume resample_inplane(const Volume& vol, double target_mm, Interp mode) {
  if (!(target_mm > 0)) throw ConfigError("target spacing must be > 0");
  const Shape3 sh = vol.shape();
  const int rows = resampled_size(sh.rows, vol.spacing.row_mm, target_mm);
  const int cols = resampled_size(sh.cols, vol.spacing.col_mm, target_mm);
  Volume out = vol;
  auto src = [&](int i, double old_mm, int n) { return std::clamp(source_coord(i, target_mm, old_mm), 0.0, n - 1.0); };
  if (mode == Interp::nearest) {
    out.voxels = resample_grid(vol.voxels, rows, cols, [&](int s, int r, int c) {
      const int y = static_cast<int>(std::floor(src(r, vol.spacing.row_mm, sh.rows) + 0.5));
      const int x = static_cast<int>(std::floor(src(c, vol.spacing.col_mm, sh.cols) + 0.5));
      return vol.voxels(s, y, x);
    });
  } else {
    out.voxels = resample_grid(vol.voxels, rows, cols, [&](int s, int r, int c) {
      const double y = src(r, vol.spacing.row_mm, sh.rows), x = src(c, vol.spacing.col_mm, sh.cols);
      const int y0 = std::min(static_cast<int>(y), sh.rows - 1), x0 = std::min(static_cast<int>(x), sh.cols - 1);
      const int y1 = std::min(y0 + 1, sh.rows - 1), x1 = std::min(x0 + 1, sh.cols - 1);
      const double fy = y - y0, fx = x - x0;
      const double top = vol.voxels(s, y0, x0) * (1 - fx) + vol.voxels(s, y0, x1) * fx;
      const double bot = vol.voxels(s, y1, x0) * (1 - fx) + vol.voxels(s, y1, x1) * fx;
      return top * (1 - fy) + bot * fy;
    });
  }
  out.spacing = Spacing(target_mm, target_mm, vol.spacing.slice_mm);
  return out;
}

LabelMap resample_inplane(const LabelMap& labels, double target_mm, Interp mode) {
  if (mode != Interp::nearest) throw ConfigError("label maps must be resampled with nearest interpolation");
  if (!(target_mm > 0)) throw ConfigError("target spacing must be > 0");
  const Shape3 sh = labels.shape();
  const int rows = resampled_size(sh.rows, labels.spacing.row_mm, target_mm);
  const int cols = resampled_size(sh.cols, labels.spacing.col_mm, target_mm);
  LabelMap out = labels;
  auto src = [&](int i, double old_mm, int n) {
    return static_cast<int>(std::floor(std::clamp(source_coord(i, target_mm, old_mm), 0.0, n - 1.0) + 0.5));
  };
  out.labels = resample_grid(labels.labels, rows, cols, [&](int s, int r, int c) {
    return labels.labels(s, src(r, labels.spacing.row_mm, sh.rows), src(c, labels.spacing.col_mm, sh.cols));
  });
  out.spacing = Spacing(target_mm, target_mm, labels.spacing.slice_mm);
  return out;
}

int crop_offset(int n, int size) { return n > size ? (n - size) / 2 : 0; }
int pad_before(int n, int size) { return n < size ? (size - n) / 2 : 0; }

Volume center_crop_or_pad(const Volume& vol, int size) {
  if (size < 1) throw ShapeError("crop size must be >= 1");
  const auto& v = vol.voxels.values();
  const double fill = *std::min_element(v.begin(), v.end());
  Volume out = vol;
  out.voxels = crop_pad_grid(vol.voxels, size, fill);
  return out;
}

LabelMap center_crop_or_pad(const LabelMap& labels, int size) {
  if (size < 1) throw ShapeError("crop size must be >= 1");
  LabelMap out = labels;
  out.labels = crop_pad_grid(labels.labels, size, std::uint8_t{0});
  return out;
}

Volume normalize_minmax(const Volume& vol, bool* degenerate) {
  Volume out = vol;
  auto& v = out.voxels.values();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double mn = *lo, mx = *hi;
  const bool constant = !(mx > mn);
  if (degenerate) *degenerate = constant;
  if (constant) {
    log::warn("normalize_minmax: constant volume '" + vol.subject_id + "' mapped to zeros");
    std::fill(v.begin(), v.end(), 0.0);
  } else {
    const double scale = 2.0 / (mx - mn);
    for (double& x : v) x = std::clamp((x - mn) * scale - 1.0, -1.0, 1.0);
  }
  out.normalized = true;
  return out;
}

std::uint8_t to_four_class_id(std::uint8_t id) {
  switch (id) {
    case eight::RV:
      return four::RV;
    case eight::MYO:
      return four::MYO;
    case eight::LV:
      return four::LV;
    default:
      return four::background;
  }
}

LabelMap to_four_class(const LabelMap& in) {
  if (in.scheme != SchemeKind::EightClass) throw ConfigError("to_four_class requires an EightClass label map");
  LabelMap out = in;
  out.scheme = SchemeKind::FourClass;
  for (auto& v : out.labels.values()) v = to_four_class_id(v);
  return out;
}

LabelMap merge_heart_labels(const LabelMap& predicted, const LabelMap& annotation) {
  if (predicted.scheme != SchemeKind::EightClass) throw ConfigError("merge_heart_labels: prediction must be EightClass");
  if (annotation.scheme != SchemeKind::FourClass) throw ConfigError("merge_heart_labels: annotation must be FourClass");
  if (!(predicted.shape() == annotation.shape())) throw ShapeError("merge_heart_labels: shape mismatch");
  LabelMap out = predicted;
  auto& o = out.labels.values();
  const auto& a = annotation.labels.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (a[i] != four::background)
      o[i] = static_cast<std::uint8_t>(a[i] + 4);
    else if (o[i] >= eight::RV)
      o[i] = eight::body;
  }
  return out;
}

void one_hot_slice(const LabelMap& labels, int s, int C, float* out) {
  const auto src = labels.labels.slice(s);
  const std::size_t plane = src.size();
  std::fill(out, out + plane * C, 0.0f);
  for (std::size_t i = 0; i < plane; ++i) {
    if (src[i] >= C) throw ShapeError("one_hot: label id " + std::to_string(src[i]) + " >= " + std::to_string(C));
    out[src[i] * plane + i] = 1.0f;
  }
}

std::vector<float> one_hot(const LabelMap& labels, int C) {
  const Shape3 sh = labels.shape();
  std::vector<float> out(sh.voxels() * C);
  for (int s = 0; s < sh.slices; ++s) one_hot_slice(labels, s, C, out.data() + s * sh.slice_voxels() * C);
  return out;
}

PreparedPair prepare_pair(const Volume& image, const LabelMap& labels, double target_mm, int size) {
  if (!(image.shape() == labels.shape())) throw ShapeError("image and label shapes differ");
  PreparedPair p;
  p.image = prepare_volume(image, target_mm, size);
  p.labels = center_crop_or_pad(resample_inplane(labels, target_mm, Interp::nearest), size);
  return p;
}

Volume prepare_volume(const Volume& image, double target_mm, int size) {
  return normalize_minmax(center_crop_or_pad(resample_inplane(image, target_mm, Interp::linear), size));
}

}  // namespace cardiosynth::preprocess
