#pragma once

#include <string>

#include "cardiosynth/core/types.hpp"

namespace cardiosynth {

/// NIfTI-1 single-file (.nii, optionally gzip-compressed .nii.gz) I/O.
///
/// Axis mapping: NIfTI i (fastest) = col, j = row, k = slice. Spacing comes
/// from pixdim[1..3]. Phase and subject id travel in the `descrip` field as
/// "phase=<ED|ES|none>[;norm=1];subject=<id>".
namespace nifti {

Volume read_volume(const std::string& path);
/// Label files must use an integer datatype; ids are validated against `scheme`.
LabelMap read_labels(const std::string& path, SchemeKind scheme);

/// Images are written as float32.
void write_volume(const Volume& vol, const std::string& path);
/// Labels are written as uint8.
void write_labels(const LabelMap& labels, const std::string& path);

}  // namespace nifti
}  // namespace cardiosynth
