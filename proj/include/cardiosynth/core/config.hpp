#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>

#include <json.hpp>

#include "cardiosynth/core/types.hpp"

namespace cardiosynth {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum class Profile { desk, paper };
std::string_view to_string(Profile p);
Profile profile_from_string(std::string_view s);

enum class NetworkKind { net1, net3 };
std::string_view to_string(NetworkKind k);
NetworkKind network_kind_from_string(std::string_view s);

enum class NormKind { batch, instance, none };
std::string_view to_string(NormKind k);
NormKind norm_kind_from_string(std::string_view s);

enum class Conditioning { four_class, eight_class };
std::string_view to_string(Conditioning c);
Conditioning conditioning_from_string(std::string_view s);
inline SchemeKind scheme_of(Conditioning c) {
  return c == Conditioning::four_class ? SchemeKind::FourClass : SchemeKind::EightClass;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Interval&) const = default;
};

enum class AugmentOp { affine, elastic, mirror, gamma, crop_nonzero };
std::string_view to_string(AugmentOp op);
AugmentOp augment_op_from_string(std::string_view s);

/// Training-time transform settings; magnitudes are mild by default.
struct AugmentConfig {
  Interval scale_range{0.85, 1.15};
  Interval rotation_deg_range{-15.0, 15.0};
  double elastic_grid_mm = 40.0;
  double elastic_sigma_mm = 3.0;
  double mirror_prob = 0.5;
  Interval gamma_range{0.7, 1.5};
  std::set<AugmentOp> enabled_ops{AugmentOp::affine, AugmentOp::elastic, AugmentOp::mirror, AugmentOp::gamma,
                                  AugmentOp::crop_nonzero};
  std::uint64_t seed = 0;

  /// Configuration with every op disabled.
  static AugmentConfig none();
  void validate() const;
  bool operator==(const AugmentConfig&) const = default;
};

struct UNetSpec {
  int in_channels = 1;
  int out_channels = 8;
  int depth = 4;
  int base_channels = 32;
  double leaky_slope = 0.01;
  NormKind norm_kind = NormKind::batch;
  double dropout_rate = 0.5;
  double init_gain = 0.1;

  void validate() const;
  bool operator==(const UNetSpec&) const = default;
};

struct SpadeGenSpec {
  int label_channels = 8;
  int z_dim = 256;
  int base_channels = 64;
  int num_upsampling_stages = 5;
  int max_channel_mult = 16;
  int spade_hidden = 128;
  int spade_kernel = 3;
  /// Parameter-free normalization: batch (with running stats) or instance.
  NormKind param_free_norm = NormKind::batch;

  void validate() const;
  bool operator==(const SpadeGenSpec&) const = default;
};

struct StyleEncoderSpec {
  int base_channels = 64;
  int num_downsampling = 6;
  int z_dim = 256;

  bool operator==(const StyleEncoderSpec&) const = default;
};

struct DiscriminatorSpec {
  int input_channels = 9;
  int base_channels = 64;
  int num_layers = 4;
  int num_scales = 2;
  NormKind norm_kind = NormKind::instance;

  bool operator==(const DiscriminatorSpec&) const = default;
};

struct SegTrainConfig {
  NetworkKind network_kind = NetworkKind::net1;
  int batch_size = 10;
  int max_epochs = 200;
  double initial_lr = 1e-4;
  double weight_decay = 5e-5;
  double dropout_rate = 0.5;
  NormKind norm_kind = NormKind::batch;
  double lr_plateau_factor = 0.2;
  int plateau_window_epochs = 30;
  double min_lr = 1e-6;
  double ema_decay = 0.9;
  double plateau_rel_threshold = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int input_size = kPaperCropSize;
  int unet_depth = 4;
  int unet_base_channels = 32;
  double unet_init_gain = 0.1;
  std::uint64_t seed = 0;
  AugmentConfig augment;

  static SegTrainConfig defaults(NetworkKind kind, Profile profile = Profile::paper);
  UNetSpec unet_spec() const;
  int num_classes() const { return network_kind == NetworkKind::net1 ? 8 : 4; }
  void validate() const;
  bool operator==(const SegTrainConfig&) const = default;
};

struct GanTrainConfig {
  double lr = 2e-4;
  int batch_size = 20;
  double kl_weight = 0.5;
  double feature_matching_weight = 10.0;
  /// Reserved for a pretrained perceptual loss; must stay 0 (not implemented).
  double perceptual_weight = 0.0;
  int z_dim = 256;
  int discriminator_scales = 2;
  int epochs = 200;
  std::uint64_t seed = 0;
  Conditioning conditioning = Conditioning::eight_class;
  double adam_beta1 = 0.0;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int input_size = kPaperCropSize;
  int gen_base_channels = 64;
  int gen_upsampling_stages = 5;
  int gen_max_channel_mult = 16;
  int spade_hidden = 128;
  int enc_base_channels = 64;
  int disc_base_channels = 64;
  int disc_layers = 4;
  AugmentConfig augment;

  static GanTrainConfig defaults(Profile profile = Profile::paper);
  int label_channels() const { return conditioning == Conditioning::four_class ? 4 : 8; }
  SpadeGenSpec generator_spec() const;
  StyleEncoderSpec encoder_spec() const;
  DiscriminatorSpec discriminator_spec() const;
  void validate() const;
  bool operator==(const GanTrainConfig&) const = default;
};

Json to_json(const Interval& v);
Json to_json(const AugmentConfig& c);
Json to_json(const UNetSpec& s);
Json to_json(const SegTrainConfig& c);
Json to_json(const GanTrainConfig& c);

/// Parsers start from `base` and override keys present in `j`; unknown keys throw ConfigError.
AugmentConfig augment_config_from_json(const Json& j, AugmentConfig base = {});
UNetSpec unet_spec_from_json(const Json& j, UNetSpec base = {});
SegTrainConfig seg_config_from_json(const Json& j);
GanTrainConfig gan_config_from_json(const Json& j);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace cardiosynth
