#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "cardiosynth/core/config.hpp"

namespace cardiosynth::augment {

/// One 2D training sample. `labels` may be empty for image-only use.
struct SlicePair {
  int rows = 0;
  int cols = 0;
  double pixel_mm = 1.0;
  std::vector<double> image;
  std::vector<std::uint8_t> labels;

  bool has_labels() const { return !labels.empty(); }
  bool operator==(const SlicePair&) const = default;
};

SlicePair affine_aug(const SlicePair& in, const AugmentConfig& cfg, std::uint64_t draw_seed);

/// Per-pixel displacement in pixels; node_* hold the coarse-grid values (mm) before upsampling.
struct DisplacementField {
  std::vector<double> dy, dx;
  int node_rows = 0, node_cols = 0;
  std::vector<double> node_dy, node_dx;
};
DisplacementField elastic_field(int rows, int cols, double pixel_mm, const AugmentConfig& cfg,
                                std::uint64_t draw_seed);
SlicePair elastic_aug(const SlicePair& in, const AugmentConfig& cfg, std::uint64_t draw_seed);

SlicePair mirror_aug(const SlicePair& in, const AugmentConfig& cfg, std::uint64_t draw_seed);
SlicePair flip_horizontal(const SlicePair& in);

/// Exponentiation on the fixed map (x + 1) / 2 of a [-1, 1] image.
SlicePair gamma_aug(const SlicePair& in, const AugmentConfig& cfg, std::uint64_t draw_seed);
SlicePair apply_gamma(const SlicePair& in, double gamma);

/// Bounding box of pixels above the image minimum, then centred crop/pad to out_size.
SlicePair crop_nonzero(const SlicePair& in, int out_size);

enum class PipelineKind { net1, net3, gan };
PipelineKind pipeline_kind_from_string(std::string_view s);

/// Menu of the kind, in application order, restricted to cfg.enabled_ops.
std::vector<AugmentOp> build_pipeline(PipelineKind kind, const AugmentConfig& cfg);
SlicePair apply_pipeline(const std::vector<AugmentOp>& ops, const SlicePair& in, const AugmentConfig& cfg,
                         std::uint64_t draw_seed);

}  // namespace cardiosynth::augment
