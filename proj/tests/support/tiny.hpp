#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cardiosynth/core/config.hpp"
#include "cardiosynth/phantom/phantom.hpp"
#include "cardiosynth/preprocess/preprocess.hpp"
#include "cardiosynth/train/train.hpp"

namespace test_support {

using namespace cardiosynth;

inline LabelMap phantom_labels(std::uint64_t seed, Phase phase, int slices = 4) {
  auto lab = phantom::render_labels(phantom::sample_params(seed, {}, phase), Shape3{slices, 32, 32},
                                    Spacing(10.4, 10.4, 10.0));
  lab.subject_id = "ph" + std::to_string(seed);
  return lab;
}

inline Volume phantom_image(const LabelMap& lab, std::uint64_t seed) {
  auto v = preprocess::normalize_minmax(phantom::simulate_contrast(lab, phantom::TissueSignalTable{}, seed));
  v.subject_id = lab.subject_id;
  return v;
}

inline GanTrainConfig tiny_gan_config(Conditioning cond) {
  auto c = GanTrainConfig::defaults(Profile::desk);
  c.input_size = 32;
  c.z_dim = 4;
  c.gen_base_channels = 4;
  c.gen_upsampling_stages = 2;
  c.gen_max_channel_mult = 2;
  c.spade_hidden = 4;
  c.enc_base_channels = 4;
  c.disc_base_channels = 4;
  c.disc_layers = 2;
  c.batch_size = 2;
  c.epochs = 1;
  c.seed = 2;
  c.conditioning = cond;
  return c;
}

inline train::GanTrainResult tiny_gan_ckpts(Conditioning cond) {
  const auto c = tiny_gan_config(cond);
  std::vector<train::Sample> data;
  auto lab = phantom_labels(1, Phase::ED);
  auto img = phantom_image(lab, 2);
  for (int k = 0; k < 2; ++k) {
    train::Sample s;
    s.pair.rows = s.pair.cols = 32;
    s.pair.pixel_mm = 10.4;
    s.pair.image.assign(img.voxels.slice(k).begin(), img.voxels.slice(k).end());
    for (auto l : lab.labels.slice(k))
      s.pair.labels.push_back(cond == Conditioning::four_class ? preprocess::to_four_class_id(l) : l);
    data.push_back(std::move(s));
  }
  return train::train_gan(c, data);
}

}  // namespace test_support
