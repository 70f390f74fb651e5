#pragma once

#include <string_view>
#include <vector>

#include "cardiosynth/core/types.hpp"

namespace cardiosynth::preprocess {

enum class Interp { linear, nearest };
Interp interp_from_string(std::string_view s);

/// Resamples rows and cols to `target_mm`; the slice axis is untouched.
/// New size = round(old_size * old_spacing / target_mm); pixel centres are aligned.
Volume resample_inplane(const Volume& vol, double target_mm = kTargetInplaneMm, Interp mode = Interp::linear);
/// Labels only support nearest sampling.
LabelMap resample_inplane(const LabelMap& labels, double target_mm = kTargetInplaneMm, Interp mode = Interp::nearest);

/// Leading offset of a centred crop (n > size) or pad (n < size).
int crop_offset(int n, int size);
int pad_before(int n, int size);

/// Centred crop or pad of both in-plane axes to size x size. Pads with the volume minimum / background.
Volume center_crop_or_pad(const Volume& vol, int size = kPaperCropSize);
LabelMap center_crop_or_pad(const LabelMap& labels, int size = kPaperCropSize);

/// 2 (x - min) / (max - min) - 1 over the whole volume. A constant volume maps to zeros and logs a warning.
Volume normalize_minmax(const Volume& vol, bool* degenerate = nullptr);

LabelMap to_four_class(const LabelMap& eight_class);
std::uint8_t to_four_class_id(std::uint8_t eight_class_id);

/// Heart ids follow the annotation; predicted heart outside it becomes body tissue.
LabelMap merge_heart_labels(const LabelMap& predicted, const LabelMap& annotation);

/// (C, rows, cols) channel-major one-hot of slice `s`, written to `out`.
void one_hot_slice(const LabelMap& labels, int s, int C, float* out);
/// (slices, C, rows, cols).
std::vector<float> one_hot(const LabelMap& labels, int C);

struct PreparedPair {
  Volume image;
  LabelMap labels;
};

/// resample -> centre crop/pad -> normalize, with identical geometry on image and labels.
PreparedPair prepare_pair(const Volume& image, const LabelMap& labels, double target_mm, int size);
Volume prepare_volume(const Volume& image, double target_mm, int size);

}  // namespace cardiosynth::preprocess
