#include "cardiosynth/core/types.hpp"

#include <algorithm>
#include <string>

namespace cardiosynth {

Spacing::Spacing(double row, double col, double slice) : row_mm(row), col_mm(col), slice_mm(slice) {
  if (!(row > 0.0) || !(col > 0.0) || !(slice > 0.0)) throw ConfigError("spacing components must be > 0");
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::ED: return "ED";
    case Phase::ES: return "ES";
    case Phase::none: break;
  }
  return "none";
}

Phase phase_from_string(std::string_view s) {
  if (s == "ED" || s == "ed") return Phase::ED;
  if (s == "ES" || s == "es") return Phase::ES;
  if (s == "none" || s.empty()) return Phase::none;
  throw ConfigError("unknown phase '" + std::string(s) + "'");
}

void Volume::validate() const {
  if (!normalized) return;
  for (double v : voxels.values())
    if (!(v >= -1.0 && v <= 1.0)) throw ShapeError("normalized volume has a voxel outside [-1, 1]");
}

const LabelScheme& LabelScheme::four_class() {
  static const LabelScheme s(SchemeKind::FourClass, {{0, "background"}, {1, "RV"}, {2, "MYO"}, {3, "LV"}});
  return s;
}

const LabelScheme& LabelScheme::eight_class() {
  static const LabelScheme s(SchemeKind::EightClass, {{0, "background"},
                                                      {1, "body tissue"},
                                                      {2, "lung"},
                                                      {3, "liver"},
                                                      {4, "abdominal organ"},
                                                      {5, "RV"},
                                                      {6, "MYO"},
                                                      {7, "LV"}});
  return s;
}

const LabelScheme& LabelScheme::of(SchemeKind kind) {
  return kind == SchemeKind::FourClass ? four_class() : eight_class();
}

std::string_view LabelScheme::name() const { return to_string(kind_); }

const std::string& LabelScheme::tissue(int id) const {
  if (!contains(id)) throw ConfigError("class id " + std::to_string(id) + " not in scheme " + std::string(name()));
  return classes_[static_cast<std::size_t>(id)].tissue;
}

std::string_view to_string(SchemeKind k) { return k == SchemeKind::FourClass ? "FourClass" : "EightClass"; }

SchemeKind scheme_from_string(std::string_view s) {
  if (s == "FourClass" || s == "four_class" || s == "4") return SchemeKind::FourClass;
  if (s == "EightClass" || s == "eight_class" || s == "8") return SchemeKind::EightClass;
  throw ConfigError("unknown label scheme '" + std::string(s) + "'");
}

std::uint8_t to_scheme_code(std::string_view tissue_name, const LabelScheme& scheme) {
  for (const auto& c : scheme.classes())
    if (c.tissue == tissue_name) return c.id;
  throw ConfigError("tissue '" + std::string(tissue_name) + "' is not part of scheme " + std::string(scheme.name()));
}

void LabelMap::validate() const {
  const int n = LabelScheme::of(scheme).num_classes();
  const auto& v = labels.values();
  if (std::any_of(v.begin(), v.end(), [n](std::uint8_t x) { return x >= n; }))
    throw ShapeError("label map contains an id outside scheme " + std::string(to_string(scheme)));
}

}  // namespace cardiosynth
