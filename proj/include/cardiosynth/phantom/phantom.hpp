#pragma once

#include <cstdint>
#include <vector>

#include "cardiosynth/core/config.hpp"
#include "cardiosynth/core/types.hpp"

namespace cardiosynth::phantom {

struct PhantomParams {
  double heart_scale = 1.0;
  double heart_d_row_mm = 0.0;
  double heart_d_col_mm = 0.0;
  double heart_axis_deg = 0.0;
  double lv_wall_thickness_mm = 8.0;
  double body_a_mm = 145.0;  // lateral semi-axis
  double body_b_mm = 105.0;  // antero-posterior semi-axis
  double lung_scale = 1.0;
  double liver_scale = 1.0;
  Phase phase = Phase::ED;
  std::uint64_t seed = 0;

  bool operator==(const PhantomParams&) const = default;
};

struct PhantomRanges {
  Interval heart_scale{0.85, 1.2};
  Interval heart_d_row_mm{-8.0, 8.0};
  Interval heart_d_col_mm{-8.0, 8.0};
  Interval heart_axis_deg{-20.0, 20.0};
  Interval lv_wall_thickness_mm{7.0, 10.0};
  Interval body_a_mm{135.0, 155.0};
  Interval body_b_mm{95.0, 115.0};
  Interval lung_scale{0.85, 1.15};
  Interval liver_scale{0.85, 1.15};

  /// Throws ConfigError on inverted intervals or values outside physical bounds.
  void validate() const;
};

PhantomParams sample_params(std::uint64_t seed, const PhantomRanges& ranges = {}, Phase phase = Phase::ED);

/// Throws ShapeError when the field of view cannot hold the body ellipse.
LabelMap render_labels(const PhantomParams& params, Shape3 shape, Spacing spacing);

struct TissueSignalTable {
  /// Indexed by EightClass id.
  std::vector<double> mean{0.02, 0.5, 0.1, 0.4, 0.65, 0.82, 0.3, 0.95};
  /// Standard deviation of a per-subject jitter of each tissue mean.
  std::vector<double> spread{0.0, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02};
  double noise_sigma = 0.03;
  double bias_field_amplitude = 0.05;
  bool rician = false;

  static TissueSignalTable noiseless();
  void validate() const;
};

/// Tissue mean (+ per-subject jitter) + polynomial bias field + noise, min-max normalized to [-1, 1].
Volume simulate_contrast(const LabelMap& labels, const TissueSignalTable& table, std::uint64_t seed);

Json to_json(const PhantomParams& p);
Json to_json(const PhantomRanges& r);
Json to_json(const TissueSignalTable& t);
PhantomRanges ranges_from_json(const Json& j);
TissueSignalTable signal_table_from_json(const Json& j);

}  // namespace cardiosynth::phantom
