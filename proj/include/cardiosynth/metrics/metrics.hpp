#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cardiosynth/core/types.hpp"

namespace cardiosynth::metrics {

/// Foreground classes in report order.
enum class HeartClass { LV, MYO, RV };
inline constexpr HeartClass kHeartClasses[] = {HeartClass::LV, HeartClass::MYO, HeartClass::RV};

std::string_view to_string(HeartClass c);
HeartClass heart_class_from_string(std::string_view s);
/// Id of the class in the FourClass scheme.
std::uint8_t four_class_id(HeartClass c);

struct HdOptions {
  /// 100 gives the maximum distance; 95 gives HD95.
  double percentile = 100.0;
  /// Per-slice 2D distances (maximum over slices) instead of volumetric 3D.
  bool per_slice = false;
};

/// Binary-mask primitives; masks are nonzero where set.
double dice_masks(const Grid3<std::uint8_t>& a, const Grid3<std::uint8_t>& b);
double hausdorff_masks(const Grid3<std::uint8_t>& a, const Grid3<std::uint8_t>& b, const Spacing& spacing,
                       const HdOptions& opts = {});
/// Squared Euclidean distance (mm^2) from every voxel to the nearest set voxel; +inf when the mask is empty.
std::vector<double> squared_distance_transform(const Grid3<std::uint8_t>& mask, const Spacing& spacing);
double image_diagonal_mm(const Shape3& shape, const Spacing& spacing);

double dice(const LabelMap& pred, const LabelMap& gt, std::uint8_t class_id);
double hausdorff(const LabelMap& pred, const LabelMap& gt, std::uint8_t class_id, const Spacing& spacing,
                 const HdOptions& opts = {});

struct MetricsRow {
  std::string subject_id;
  Phase phase = Phase::none;
  HeartClass cls = HeartClass::LV;
  double dsc = 0.0;
  double hd_mm = 0.0;
  bool operator==(const MetricsRow&) const = default;
};

struct ClassAggregate {
  HeartClass cls = HeartClass::LV;
  double mean_dsc = 0.0;
  double mean_hd_mm = 0.0;
  int count = 0;
  bool operator==(const ClassAggregate&) const = default;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  std::vector<ClassAggregate> aggregates;
  bool operator==(const MetricsReport&) const = default;
};

/// Both maps must be FourClass; returns LV, MYO, RV rows.
std::vector<MetricsRow> evaluate(const LabelMap& pred, const LabelMap& gt, const Spacing& spacing,
                                 const HdOptions& opts = {});
inline std::vector<MetricsRow> evaluate(const LabelMap& pred, const LabelMap& gt) {
  return evaluate(pred, gt, gt.spacing);
}
/// Per-class means over all rows (phases pooled); throws on an empty cohort.
std::vector<ClassAggregate> aggregate(const std::vector<MetricsRow>& rows);
MetricsReport make_report(std::vector<MetricsRow> rows);

nlohmann::json to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);

}  // namespace cardiosynth::metrics
