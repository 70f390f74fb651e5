#pragma once

#include <cstdint>
#include <vector>

#include "cardiosynth/augment/augment.hpp"
#include "cardiosynth/core/checkpoint.hpp"
#include "cardiosynth/core/types.hpp"
#include "cardiosynth/nets/nets.hpp"

namespace cardiosynth::infer {

/// Per-pixel argmax over `classes` planes of `plane` logits; ties go to the lower id.
std::vector<std::uint8_t> argmax_channels(const float* logits, int classes, std::size_t plane);

/// `input_size` is the in-plane size the network was trained at.
LabelMap predict_multitissue(nets::UNet& net, const Volume& vol, int input_size);
LabelMap predict_multitissue(const Checkpoint& ckpt, const Volume& vol);
LabelMap segment_cardiac(nets::UNet& net, const Volume& vol, int input_size);
LabelMap segment_cardiac(const Checkpoint& ckpt, const Volume& vol);
/// Argmax labels for each slice, concatenated.
std::vector<std::uint8_t> predict_slices(nets::UNet& net, const std::vector<augment::SlicePair>& slices);

enum class SynthMode { four_class, eight_class };
SynthMode synth_mode_from_string(std::string_view s);
std::string_view to_string(SynthMode m);

enum class ZMode { shared, per_slice };

struct SynthOptions {
  ZMode z_mode = ZMode::shared;
  std::uint64_t seed = 0;
};

struct SynthResult {
  Volume image;
  /// The conditioning map (FourClass on the 4-class path).
  LabelMap labels;
};

/// Slice-by-slice generation; the style volume is encoded once and one code is drawn per volume.
/// Without a style (eight_class only) the code is drawn from the prior.
SynthResult synthesize_volume(nets::SpadeGenerator& gen, nets::StyleEncoder& enc, const LabelMap& labels,
                              const Volume* style, SynthMode mode, const SynthOptions& opts = {});
SynthResult synthesize_volume(const Checkpoint& gen, const Checkpoint& enc, const LabelMap& labels, const Volume* style,
                              SynthMode mode, const SynthOptions& opts = {});

}  // namespace cardiosynth::infer
