#include "cardiosynth/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cardiosynth/core/error.hpp"

namespace cardiosynth::metrics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_same(const Shape3& a, const Shape3& b, const char* what) {
  if (!(a == b)) throw ShapeError(std::string(what) + ": mask shapes differ");
}

// Lower envelope of parabolas a*(p-q)^2 + f(q) along one line.
void edt_line(const double* f, double* d, int n, std::ptrdiff_t stride, double a, std::vector<int>& v,
              std::vector<double>& z, std::vector<double>& buf) {
  buf.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) buf[i] = f[i * stride];
  v.resize(static_cast<std::size_t>(n));
  z.resize(static_cast<std::size_t>(n) + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (buf[q] == kInf) continue;
    const double fq = buf[q] + a * q * q;
    while (k >= 0) {
      const int p = v[k];
      const double s = (fq - (buf[p] + a * p * p)) / (2.0 * a * (q - p));
      if (s <= z[k]) {
        --k;
        continue;
      }
      ++k;
      v[k] = q;
      z[k] = s;
      break;
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
    }
  }
  if (k < 0) {
    for (int i = 0; i < n; ++i) d[i * stride] = kInf;
    return;
  }
  z[k + 1] = kInf;
  int j = 0;
  for (int p = 0; p < n; ++p) {
    while (z[j + 1] < p) ++j;
    const double dq = p - v[j];
    d[p * stride] = a * dq * dq + buf[v[j]];
  }
}

double percentile_of(std::vector<double>& v, double pct) {
  if (pct >= 100.0) return *std::max_element(v.begin(), v.end());
  std::sort(v.begin(), v.end());
  const double pos = pct / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

bool any_set(const Grid3<std::uint8_t>& m) {
  return std::any_of(m.values().begin(), m.values().end(), [](std::uint8_t x) { return x != 0; });
}

double hd_volume(const Grid3<std::uint8_t>& a, const Grid3<std::uint8_t>& b, const Spacing& sp, double pct) {
  const bool ea = !any_set(a), eb = !any_set(b);
  if (ea && eb) return 0.0;
  if (ea || eb) return image_diagonal_mm(a.shape(), sp);
  const auto da = squared_distance_transform(a, sp);
  const auto db = squared_distance_transform(b, sp);
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.values()[i]) d.push_back(db[i]);
    if (b.values()[i]) d.push_back(da[i]);
  }
  if (pct >= 100.0) return std::sqrt(*std::max_element(d.begin(), d.end()));
  if (pct > 0.0) {
    // Percentile over both directed distance sets.
    for (auto& x : d) x = std::sqrt(x);
    return percentile_of(d, pct);
  }
  throw ValueError("hausdorff: percentile must be in (0, 100]");
}

}  // namespace

std::string_view to_string(HeartClass c) {
  switch (c) {
    case HeartClass::LV: return "LV";
    case HeartClass::MYO: return "MYO";
    case HeartClass::RV: return "RV";
  }
  return "?";
}

HeartClass heart_class_from_string(std::string_view s) {
  for (auto c : kHeartClasses)
    if (s == to_string(c)) return c;
  throw ConfigError("unknown class '" + std::string(s) + "' (expected LV, MYO or RV)");
}

std::uint8_t four_class_id(HeartClass c) {
  switch (c) {
    case HeartClass::LV: return four::LV;
    case HeartClass::MYO: return four::MYO;
    case HeartClass::RV: return four::RV;
  }
  return 0;
}

double image_diagonal_mm(const Shape3& s, const Spacing& sp) {
  return std::hypot(s.slices * sp.slice_mm, s.rows * sp.row_mm, s.cols * sp.col_mm);
}

std::vector<double> squared_distance_transform(const Grid3<std::uint8_t>& mask, const Spacing& sp) {
  const Shape3 s = mask.shape();
  std::vector<double> f(mask.size()), g(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) f[i] = mask.values()[i] ? 0.0 : kInf;
  std::vector<int> v;
  std::vector<double> z, buf;
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(s.slice_voxels());
  for (int k = 0; k < s.slices; ++k)
    for (int r = 0; r < s.rows; ++r) {
      const std::size_t o = mask.index(k, r, 0);
      edt_line(f.data() + o, g.data() + o, s.cols, 1, sp.col_mm * sp.col_mm, v, z, buf);
    }
  for (int k = 0; k < s.slices; ++k)
    for (int c = 0; c < s.cols; ++c) {
      const std::size_t o = mask.index(k, 0, c);
      edt_line(g.data() + o, f.data() + o, s.rows, s.cols, sp.row_mm * sp.row_mm, v, z, buf);
    }
  for (int r = 0; r < s.rows; ++r)
    for (int c = 0; c < s.cols; ++c) {
      const std::size_t o = mask.index(0, r, c);
      edt_line(f.data() + o, g.data() + o, s.slices, plane, sp.slice_mm * sp.slice_mm, v, z, buf);
    }
  return g;
}

double dice_masks(const Grid3<std::uint8_t>& a, const Grid3<std::uint8_t>& b) {
  check_same(a.shape(), b.shape(), "dice");
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a.values()[i] != 0, y = b.values()[i] != 0;
    na += x;
    nb += y;
    both += x && y;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

double hausdorff_masks(const Grid3<std::uint8_t>& a, const Grid3<std::uint8_t>& b, const Spacing& sp,
                       const HdOptions& opts) {
  check_same(a.shape(), b.shape(), "hausdorff");
  if (!opts.per_slice) return hd_volume(a, b, sp, opts.percentile);
  const Shape3 s = a.shape();
  const Shape3 one{1, s.rows, s.cols};
  double worst = 0.0;
  for (int k = 0; k < s.slices; ++k) {
    Grid3<std::uint8_t> sa(one, std::vector<std::uint8_t>(a.slice(k).begin(), a.slice(k).end()));
    Grid3<std::uint8_t> sb(one, std::vector<std::uint8_t>(b.slice(k).begin(), b.slice(k).end()));
    worst = std::max(worst, hd_volume(sa, sb, sp, opts.percentile));
  }
  return worst;
}

namespace {

Grid3<std::uint8_t> class_mask(const LabelMap& m, std::uint8_t id) {
  Grid3<std::uint8_t> out(m.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = m.labels.values()[i] == id;
  return out;
}

void check_maps(const LabelMap& pred, const LabelMap& gt, std::uint8_t id) {
  if (pred.scheme != gt.scheme)
    throw ConfigError("metrics: scheme mismatch (" + std::string(to_string(pred.scheme)) + " vs " +
                      std::string(to_string(gt.scheme)) + ")");
  check_same(pred.shape(), gt.shape(), "metrics");
  if (!gt.label_scheme().contains(id)) throw ValueError("metrics: class id " + std::to_string(id) + " out of range");
}

}  // namespace

double dice(const LabelMap& pred, const LabelMap& gt, std::uint8_t class_id) {
  check_maps(pred, gt, class_id);
  return dice_masks(class_mask(pred, class_id), class_mask(gt, class_id));
}

double hausdorff(const LabelMap& pred, const LabelMap& gt, std::uint8_t class_id, const Spacing& spacing,
                 const HdOptions& opts) {
  check_maps(pred, gt, class_id);
  return hausdorff_masks(class_mask(pred, class_id), class_mask(gt, class_id), spacing, opts);
}

std::vector<MetricsRow> evaluate(const LabelMap& pred, const LabelMap& gt, const Spacing& spacing,
                                 const HdOptions& opts) {
  if (pred.scheme != SchemeKind::FourClass || gt.scheme != SchemeKind::FourClass)
    throw ConfigError("evaluate: both label maps must use the FourClass scheme");
  std::vector<MetricsRow> rows;
  for (auto c : kHeartClasses) {
    MetricsRow r;
    r.subject_id = gt.subject_id;
    r.phase = gt.phase;
    r.cls = c;
    r.dsc = dice(pred, gt, four_class_id(c));
    r.hd_mm = hausdorff(pred, gt, four_class_id(c), spacing, opts);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ClassAggregate> aggregate(const std::vector<MetricsRow>& rows) {
  if (rows.empty()) throw ValueError("aggregate: empty cohort");
  std::vector<ClassAggregate> out;
  for (auto c : kHeartClasses) {
    ClassAggregate a;
    a.cls = c;
    for (const auto& r : rows)
      if (r.cls == c) {
        a.mean_dsc += r.dsc;
        a.mean_hd_mm += r.hd_mm;
        ++a.count;
      }
    if (a.count == 0) continue;
    a.mean_dsc /= a.count;
    a.mean_hd_mm /= a.count;
    out.push_back(a);
  }
  return out;
}

MetricsReport make_report(std::vector<MetricsRow> rows) {
  MetricsReport r;
  r.aggregates = aggregate(rows);
  r.rows = std::move(rows);
  return r;
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json rows = nlohmann::json::array(), agg = nlohmann::json::array();
  for (const auto& x : r.rows)
    rows.push_back({{"subject_id", x.subject_id},
                    {"phase", to_string(x.phase)},
                    {"class", to_string(x.cls)},
                    {"dsc", x.dsc},
                    {"hd_mm", x.hd_mm}});
  for (const auto& a : r.aggregates)
    agg.push_back({{"class", to_string(a.cls)}, {"mean_dsc", a.mean_dsc}, {"mean_hd_mm", a.mean_hd_mm}, {"count", a.count}});
  return {{"rows", rows}, {"aggregates", agg}};
}

MetricsReport report_from_json(const nlohmann::json& j) {
  try {
    MetricsReport r;
    for (const auto& x : j.at("rows")) {
      MetricsRow row;
      row.subject_id = x.at("subject_id").get<std::string>();
      row.phase = phase_from_string(x.at("phase").get<std::string>());
      row.cls = heart_class_from_string(x.at("class").get<std::string>());
      row.dsc = x.at("dsc").get<double>();
      row.hd_mm = x.at("hd_mm").get<double>();
      r.rows.push_back(std::move(row));
    }
    for (const auto& x : j.at("aggregates")) {
      ClassAggregate a;
      a.cls = heart_class_from_string(x.at("class").get<std::string>());
      a.mean_dsc = x.at("mean_dsc").get<double>();
      a.mean_hd_mm = x.at("mean_hd_mm").get<double>();
      a.count = x.at("count").get<int>();
      r.aggregates.push_back(a);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metrics report: ") + e.what());
  }
}

}  // namespace cardiosynth::metrics
