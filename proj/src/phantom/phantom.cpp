#include "cardiosynth/phantom/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cardiosynth/core/json_reader.hpp"
#include "cardiosynth/core/rng.hpp"

namespace cardiosynth::phantom {

namespace {

void check_interval(const Interval& v, double lo, double hi, const char* name) {
  if (!(v.lo <= v.hi)) throw ConfigError(std::string("phantom range ") + name + " is empty or inverted");
  if (v.lo < lo || v.hi > hi)
    throw ConfigError(std::string("phantom range ") + name + " outside [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
}

double draw(Rng& r, const Interval& v) { return v.lo == v.hi ? v.lo : r.uniform(v.lo, v.hi); }

struct Ellipse {
  double cx, cy, ax, by;
  bool contains(double x, double y) const {
    const double u = (x - cx) / ax, v = (y - cy) / by;
    return u * u + v * v < 1.0;
  }
};

}  // namespace

void PhantomRanges::validate() const {
  check_interval(heart_scale, 0.3, 2.0, "heart_scale");
  check_interval(heart_d_row_mm, -40.0, 40.0, "heart_d_row_mm");
  check_interval(heart_d_col_mm, -40.0, 40.0, "heart_d_col_mm");
  check_interval(heart_axis_deg, -90.0, 90.0, "heart_axis_deg");
  check_interval(lv_wall_thickness_mm, 2.0, 30.0, "lv_wall_thickness_mm");
  check_interval(body_a_mm, 60.0, 250.0, "body_a_mm");
  check_interval(body_b_mm, 50.0, 200.0, "body_b_mm");
  check_interval(lung_scale, 0.3, 2.0, "lung_scale");
  check_interval(liver_scale, 0.3, 2.0, "liver_scale");
}

PhantomParams sample_params(std::uint64_t seed, const PhantomRanges& ranges, Phase phase) {
  ranges.validate();
  if (phase == Phase::none) throw ConfigError("phantom phase must be ED or ES");
  Rng r(derive_seed(seed, 0x5048414eULL));
  PhantomParams p;
  p.heart_scale = draw(r, ranges.heart_scale);
  p.heart_d_row_mm = draw(r, ranges.heart_d_row_mm);
  p.heart_d_col_mm = draw(r, ranges.heart_d_col_mm);
  p.heart_axis_deg = draw(r, ranges.heart_axis_deg);
  p.lv_wall_thickness_mm = draw(r, ranges.lv_wall_thickness_mm);
  p.body_a_mm = draw(r, ranges.body_a_mm);
  p.body_b_mm = draw(r, ranges.body_b_mm);
  p.lung_scale = draw(r, ranges.lung_scale);
  p.liver_scale = draw(r, ranges.liver_scale);
  p.phase = phase;
  p.seed = seed;
  return p;
}

LabelMap render_labels(const PhantomParams& p, Shape3 shape, Spacing sp) {
  if (shape.slices < 4 || shape.rows < 32 || shape.cols < 32)
    throw ShapeError("phantom shape must be at least (4, 32, 32)");
  if (p.heart_scale <= 0 || p.lung_scale <= 0 || p.liver_scale <= 0 || p.body_a_mm <= 0 || p.body_b_mm <= 0)
    throw ConfigError("phantom scales must be > 0");
  if (shape.cols * sp.col_mm / 2 < p.body_a_mm || shape.rows * sp.row_mm / 2 < p.body_b_mm)
    throw ShapeError("shape too small to contain body ellipse");

  const double a = p.body_a_mm, b = p.body_b_mm;
  const bool es = p.phase == Phase::ES;
  // Ring closure needs a wall at least one pixel thick.
  const double min_wall = 1.01 * std::max(sp.row_mm, sp.col_mm);
  const double wall_ed = std::max(p.lv_wall_thickness_mm, min_wall);
  const double wall = es ? wall_ed * (1.0 + 0.35 * p.heart_scale) : wall_ed;
  const double theta = (205.0 + p.heart_axis_deg) * std::numbers::pi / 180.0;
  const double ux = std::cos(theta), uy = std::sin(theta);

  LabelMap out;
  out.labels = Grid3<std::uint8_t>(shape, eight::background);
  out.scheme = SchemeKind::EightClass;
  out.spacing = sp;
  out.phase = p.phase;

  const Ellipse body{0, 0, a, b};
  const Ellipse rim{0, 0, 0.93 * a, 0.93 * b};
  for (int s = 0; s < shape.slices; ++s) {
    const double t = static_cast<double>(s) / (shape.slices - 1);  // apex 0 -> base 1
    const double lf = p.lung_scale * (0.55 + 0.45 * t);
    const double vf = p.liver_scale * (1.0 - 0.55 * t);
    const double af = 1.0 - 0.5 * t;
    const Ellipse lung_l{-0.52 * a, -0.05 * b, 0.34 * a * lf, 0.62 * b * lf};
    const Ellipse lung_r{0.52 * a, -0.05 * b, 0.34 * a * lf, 0.62 * b * lf};
    const Ellipse liver{-0.38 * a, 0.30 * b, 0.42 * a * vf, 0.50 * b * vf};
    const Ellipse abdominal{0.40 * a, 0.42 * b, 0.25 * a * af, 0.26 * b * af};

    const double r_lv_ed = p.heart_scale * (9.0 + 16.0 * t);
    const double r_lv = es ? 0.7 * r_lv_ed : r_lv_ed;
    const double r_out = r_lv + wall;
    const double r_out_ed = r_lv_ed + wall_ed;
    const double rv_taper = (0.55 + 0.45 * t) * (es ? 0.8 : 1.0);
    const double rv_a = 0.75 * r_out_ed * rv_taper, rv_b = 1.35 * r_out_ed * rv_taper;
    const double hx = 0.08 * a + p.heart_d_col_mm;
    const double hy = -0.08 * b + p.heart_d_row_mm + 5.0 * (t - 0.5);
    const double rv_d = 0.85 * r_out_ed + 0.3 * rv_a;
    const double rvx = hx + ux * rv_d, rvy = hy + uy * rv_d;

    for (int r = 0; r < shape.rows; ++r) {
      const double y = (r - (shape.rows - 1) / 2.0) * sp.row_mm;
      for (int c = 0; c < shape.cols; ++c) {
        const double x = (c - (shape.cols - 1) / 2.0) * sp.col_mm;
        std::uint8_t id = eight::background;
        if (body.contains(x, y)) {
          id = eight::body;
          if (rim.contains(x, y)) {
            if (abdominal.contains(x, y)) id = eight::abdominal;
            if (liver.contains(x, y)) id = eight::liver;
            if (lung_l.contains(x, y) || lung_r.contains(x, y)) id = eight::lung;
          }
        }
        // RV ellipse in the heart frame, major axis perpendicular to u.
        const double dx = x - rvx, dy = y - rvy;
        const double along = dx * ux + dy * uy, across = -dx * uy + dy * ux;
        if ((along / rv_a) * (along / rv_a) + (across / rv_b) * (across / rv_b) < 1.0) id = eight::RV;
        const double d = std::hypot(x - hx, y - hy);
        if (d < r_out) id = eight::MYO;
        if (d < r_lv) id = eight::LV;
        out.labels(s, r, c) = id;
      }
    }
  }
  return out;
}

TissueSignalTable TissueSignalTable::noiseless() {
  TissueSignalTable t;
  std::fill(t.spread.begin(), t.spread.end(), 0.0);
  t.noise_sigma = 0.0;
  t.bias_field_amplitude = 0.0;
  return t;
}

void TissueSignalTable::validate() const {
  if (spread.size() != mean.size()) throw ConfigError("signal table: mean and spread sizes differ");
  for (double m : mean)
    if (!(m > 0.0 && m <= 1.0)) throw ConfigError("signal table: tissue means must lie in (0, 1]");
  for (double s : spread)
    if (!(s >= 0.0)) throw ConfigError("signal table: spreads must be >= 0");
  if (!(noise_sigma >= 0.0) || !(bias_field_amplitude >= 0.0))
    throw ConfigError("signal table: noise and bias amplitudes must be >= 0");
  if (mean.size() == 8) {
    const double myo = mean[eight::MYO];
    if (!(mean[eight::LV] > myo && mean[eight::RV] > myo && myo > mean[eight::lung]))
      throw ConfigError("signal table: expected blood pool > myocardium > lung");
  }
}

Volume simulate_contrast(const LabelMap& labels, const TissueSignalTable& table, std::uint64_t seed) {
  if (labels.scheme != SchemeKind::EightClass) throw ConfigError("simulate_contrast requires EightClass labels");
  table.validate();
  const Shape3 sh = labels.shape();
  Rng rng(derive_seed(seed, 0x4d52ULL));
  std::vector<double> means(table.mean.size());
  for (std::size_t k = 0; k < means.size(); ++k) means[k] = table.mean[k] + table.spread[k] * rng.normal();
  double coef[6];
  for (double& c : coef) c = rng.uniform(-1.0, 1.0);

  Volume v;
  v.voxels = Grid3<double>(sh, 0.0);
  v.spacing = labels.spacing;
  v.phase = labels.phase;
  v.subject_id = labels.subject_id;
  for (int s = 0; s < sh.slices; ++s) {
    const double z = sh.slices > 1 ? 2.0 * s / (sh.slices - 1) - 1.0 : 0.0;
    for (int r = 0; r < sh.rows; ++r) {
      const double y = sh.rows > 1 ? 2.0 * r / (sh.rows - 1) - 1.0 : 0.0;
      for (int c = 0; c < sh.cols; ++c) {
        const double x = sh.cols > 1 ? 2.0 * c / (sh.cols - 1) - 1.0 : 0.0;
        const std::uint8_t id = labels.labels(s, r, c);
        if (id >= means.size())
          throw ConfigError("signal table has no entry for tissue '" + LabelScheme::eight_class().tissue(id) + "'");
        double val = means[id];
        if (table.bias_field_amplitude > 0.0)
          val += table.bias_field_amplitude * (coef[0] * x + coef[1] * y + coef[2] * x * y +
                                               coef[3] * (x * x - 1.0 / 3) + coef[4] * (y * y - 1.0 / 3) + coef[5] * z) /
                 3.0;
        if (table.noise_sigma > 0.0) {
          const double n1 = table.noise_sigma * rng.normal();
          if (table.rician) {
            const double n2 = table.noise_sigma * rng.normal();
            val = std::hypot(val + n1, n2);
          } else {
            val += n1;
          }
        }
        v.voxels(s, r, c) = val;
      }
    }
  }
  auto& vals = v.voxels.values();
  const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
  const double mn = *lo, mx = *hi;
  for (double& x : vals) x = mx > mn ? 2.0 * (x - mn) / (mx - mn) - 1.0 : 0.0;
  v.normalized = true;
  return v;
}

Json to_json(const PhantomParams& p) {
  return Json{{"heart_scale", p.heart_scale},
              {"heart_center_offset_mm", Json::array({p.heart_d_row_mm, p.heart_d_col_mm})},
              {"heart_axis_deg", p.heart_axis_deg},
              {"lv_wall_thickness_mm", p.lv_wall_thickness_mm},
              {"body_axes_mm", Json::array({p.body_a_mm, p.body_b_mm})},
              {"lung_scale", p.lung_scale},
              {"liver_scale", p.liver_scale},
              {"phase", std::string(to_string(p.phase))},
              {"seed", p.seed}};
}

Json to_json(const PhantomRanges& r) {
  return Json{{"heart_scale", to_json(r.heart_scale)},
              {"heart_d_row_mm", to_json(r.heart_d_row_mm)},
              {"heart_d_col_mm", to_json(r.heart_d_col_mm)},
              {"heart_axis_deg", to_json(r.heart_axis_deg)},
              {"lv_wall_thickness_mm", to_json(r.lv_wall_thickness_mm)},
              {"body_a_mm", to_json(r.body_a_mm)},
              {"body_b_mm", to_json(r.body_b_mm)},
              {"lung_scale", to_json(r.lung_scale)},
              {"liver_scale", to_json(r.liver_scale)}};
}

Json to_json(const TissueSignalTable& t) {
  return Json{{"mean", t.mean},
              {"spread", t.spread},
              {"noise_sigma", t.noise_sigma},
              {"bias_field_amplitude", t.bias_field_amplitude},
              {"rician", t.rician}};
}

PhantomRanges ranges_from_json(const Json& j) {
  PhantomRanges r;
  JsonReader rd(j, "phantom_ranges");
  auto iv = [&](const char* key, Interval& out) {
    rd.get_with(key, [&](const Json& v) { out = interval_from_json(v); });
  };
  iv("heart_scale", r.heart_scale);
  iv("heart_d_row_mm", r.heart_d_row_mm);
  iv("heart_d_col_mm", r.heart_d_col_mm);
  iv("heart_axis_deg", r.heart_axis_deg);
  iv("lv_wall_thickness_mm", r.lv_wall_thickness_mm);
  iv("body_a_mm", r.body_a_mm);
  iv("body_b_mm", r.body_b_mm);
  iv("lung_scale", r.lung_scale);
  iv("liver_scale", r.liver_scale);
  rd.finish();
  r.validate();
  return r;
}

TissueSignalTable signal_table_from_json(const Json& j) {
  TissueSignalTable t;
  JsonReader rd(j, "signal_table");
  rd.get("mean", t.mean);
  rd.get("spread", t.spread);
  rd.get("noise_sigma", t.noise_sigma);
  rd.get("bias_field_amplitude", t.bias_field_amplitude);
  rd.get("rician", t.rician);
  rd.finish();
  t.validate();
  return t;
}

}  // namespace cardiosynth::phantom
