#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cardiosynth/core/error.hpp"

namespace cardiosynth {

/// Target in-plane resolution used for every dataset, in mm.
inline constexpr double kTargetInplaneMm = 1.3;
/// In-plane network input size at the full-resolution profile.
inline constexpr int kPaperCropSize = 256;

struct Spacing {
  double row_mm = 1.0;
  double col_mm = 1.0;
  double slice_mm = 1.0;

  Spacing() = default;
  Spacing(double row, double col, double slice);

  bool operator==(const Spacing&) const = default;
};

enum class Phase { none, ED, ES };

std::string_view to_string(Phase p);
Phase phase_from_string(std::string_view s);

/// Extent of a volume indexed (slice, row, col), col fastest.
struct Shape3 {
  int slices = 0;
  int rows = 0;
  int cols = 0;

  std::size_t voxels() const {
    return static_cast<std::size_t>(slices) * static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }
  std::size_t slice_voxels() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  bool operator==(const Shape3&) const = default;
};

/// Dense 3D grid with (slice, row, col) indexing.
template <typename T>
class Grid3 {
 public:
  Grid3() = default;
  explicit Grid3(Shape3 shape, T fill = T{}) : shape_(shape), data_(shape.voxels(), fill) {
    if (shape.slices < 1 || shape.rows < 1 || shape.cols < 1) throw ShapeError("grid dimensions must be >= 1");
  }
  Grid3(Shape3 shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (shape.slices < 1 || shape.rows < 1 || shape.cols < 1) throw ShapeError("grid dimensions must be >= 1");
    if (data_.size() != shape.voxels()) throw ShapeError("grid data size does not match shape");
  }

  const Shape3& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(int s, int r, int c) const {
    return (static_cast<std::size_t>(s) * shape_.rows + static_cast<std::size_t>(r)) * shape_.cols +
           static_cast<std::size_t>(c);
  }
  T& operator()(int s, int r, int c) { return data_[index(s, r, c)]; }
  const T& operator()(int s, int r, int c) const { return data_[index(s, r, c)]; }

  std::span<T> slice(int s) { return {data_.data() + s * shape_.slice_voxels(), shape_.slice_voxels()}; }
  std::span<const T> slice(int s) const {
    return {data_.data() + s * shape_.slice_voxels(), shape_.slice_voxels()};
  }

  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  bool operator==(const Grid3&) const = default;

 private:
  Shape3 shape_;
  std::vector<T> data_;
};

struct Volume {
  Grid3<double> voxels;
  Spacing spacing;
  Phase phase = Phase::none;
  std::string subject_id;
  bool normalized = false;

  const Shape3& shape() const { return voxels.shape(); }
  /// Throws if the normalized flag is set while a voxel lies outside [-1, 1].
  void validate() const;
};

enum class SchemeKind { FourClass, EightClass };

struct LabelClass {
  std::uint8_t id;
  std::string tissue;
};

/// Class vocabulary of a label map. Ids are contiguous from 0.
class LabelScheme {
 public:
  static const LabelScheme& four_class();
  static const LabelScheme& eight_class();
  static const LabelScheme& of(SchemeKind kind);

  SchemeKind kind() const { return kind_; }
  std::string_view name() const;
  const std::vector<LabelClass>& classes() const { return classes_; }
  int num_classes() const { return static_cast<int>(classes_.size()); }
  bool contains(int id) const { return id >= 0 && id < num_classes(); }
  const std::string& tissue(int id) const;

  bool operator==(const LabelScheme& o) const { return kind_ == o.kind_; }

 private:
  LabelScheme(SchemeKind kind, std::vector<LabelClass> classes) : kind_(kind), classes_(std::move(classes)) {}
  SchemeKind kind_;
  std::vector<LabelClass> classes_;
};

std::string_view to_string(SchemeKind k);
SchemeKind scheme_from_string(std::string_view s);

/// Id of `tissue_name` under `scheme`; throws ConfigError when absent.
std::uint8_t to_scheme_code(std::string_view tissue_name, const LabelScheme& scheme);

namespace eight {
inline constexpr std::uint8_t background = 0, body = 1, lung = 2, liver = 3, abdominal = 4, RV = 5, MYO = 6, LV = 7;
}
namespace four {
inline constexpr std::uint8_t background = 0, RV = 1, MYO = 2, LV = 3;
}

struct LabelMap {
  Grid3<std::uint8_t> labels;
  SchemeKind scheme = SchemeKind::EightClass;
  Spacing spacing;
  Phase phase = Phase::none;
  std::string subject_id;

  const Shape3& shape() const { return labels.shape(); }
  const LabelScheme& label_scheme() const { return LabelScheme::of(scheme); }
  /// Throws if any voxel is not a class id of the scheme.
  void validate() const;
};

}  // namespace cardiosynth
