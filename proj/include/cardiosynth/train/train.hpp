#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "cardiosynth/augment/augment.hpp"
#include "cardiosynth/core/checkpoint.hpp"
#include "cardiosynth/core/config.hpp"
#include "cardiosynth/core/manifest.hpp"
#include "cardiosynth/nets/nets.hpp"

namespace cardiosynth::train {

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double lr = 0.0;
  double wall_time = 0.0;
  Json breakdown = Json::object();
};

struct TrainState {
  int epoch = 0;
  double lr = 0.0;
  double ema_loss = 0.0;
  bool ema_started = false;
  double best_window_ema = std::numeric_limits<double>::infinity();
  int epochs_since_improvement = 0;
  std::uint64_t rng_state = 0;
  std::vector<EpochRecord> history;
};

TrainState initial_state(double lr, std::uint64_t seed);
/// EMA update plus patience-counter learning-rate decay; call once per epoch.
TrainState plateau_step(TrainState s, double epoch_loss, const SegTrainConfig& cfg);
bool should_stop(const TrainState& s, const SegTrainConfig& cfg);

/// `wall_time` is omitted when false so stored histories are reproducible.
Json to_json(const EpochRecord& r, bool with_wall_time = true);
Json history_json(const std::vector<EpochRecord>& h, bool with_wall_time = false);

/// One training slice; `group` identifies the source volume for stratified shuffling.
struct Sample {
  augment::SlicePair pair;
  int group = 0;
};

struct TrainOptions {
  /// Per-epoch JSON lines; empty disables the file.
  std::string log_path;
  /// Replaces the epoch loss seen by the schedule (test hook).
  std::function<double(int epoch, double loss)> epoch_loss_hook;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Volume-stratified order: volumes shuffled, slices shuffled within a volume, then interleaved.
std::vector<std::size_t> epoch_order(const std::vector<Sample>& data, std::uint64_t seed);

struct SegTrainResult {
  Checkpoint checkpoint;
  TrainState state;
  std::unique_ptr<nets::UNet> model;
};

SegTrainResult train_segmentation(const SegTrainConfig& cfg, const std::vector<Sample>& data,
                                  const TrainOptions& opts = {});
SegTrainResult train_segmentation(const SegTrainConfig& cfg, const DatasetManifest& data, const AugmentConfig& aug,
                                  const TrainOptions& opts = {});
std::vector<Sample> load_segmentation_samples(const DatasetManifest& data, const SegTrainConfig& cfg);
std::unique_ptr<nets::UNet> load_unet(const Checkpoint& ckpt);

struct GanModels {
  std::unique_ptr<nets::SpadeGenerator> generator;
  std::unique_ptr<nets::StyleEncoder> encoder;
  std::unique_ptr<nets::Discriminator> discriminator;
};

GanModels build_gan(const GanTrainConfig& cfg);

struct GanTrainResult {
  Checkpoint generator;
  Checkpoint encoder;
  Checkpoint discriminator;
  TrainState state;
  GanModels models;
};

GanTrainResult train_gan(const GanTrainConfig& cfg, const std::vector<Sample>& data, const TrainOptions& opts = {});
GanTrainResult train_gan(const GanTrainConfig& cfg, const DatasetManifest& data, const AugmentConfig& aug,
                         const TrainOptions& opts = {});
std::vector<Sample> load_gan_samples(const DatasetManifest& data, const GanTrainConfig& cfg);
std::unique_ptr<nets::SpadeGenerator> load_generator(const Checkpoint& ckpt);
std::unique_ptr<nets::StyleEncoder> load_encoder(const Checkpoint& ckpt);
std::unique_ptr<nets::Discriminator> load_discriminator(const Checkpoint& ckpt);

/// (B, K, H, W) one-hot of the given slices' labels.
nn::Tensor onehot_batch(const std::vector<const augment::SlicePair*>& batch, int classes);
/// (B, 1, H, W) images.
nn::Tensor image_batch(const std::vector<const augment::SlicePair*>& batch);

}  // namespace cardiosynth::train
