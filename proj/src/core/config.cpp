#include "cardiosynth/core/config.hpp"
#include "cardiosynth/core/json_reader.hpp"

#include <fstream>
#include <sstream>

namespace cardiosynth {

namespace {

template <typename E>
struct EnumName {
  E value;
  std::string_view name;
};

template <typename E, std::size_t N>
std::string_view enum_to_string(const std::array<EnumName<E>, N>& table, E v) {
  for (const auto& e : table)
    if (e.value == v) return e.name;
  return "?";
}

template <typename E, std::size_t N>
E enum_from_string(const std::array<EnumName<E>, N>& table, std::string_view s, std::string_view what) {
  for (const auto& e : table)
    if (e.name == s) return e.value;
  throw ConfigError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

constexpr std::array<EnumName<Profile>, 2> kProfiles{{{Profile::desk, "desk"}, {Profile::paper, "paper"}}};
constexpr std::array<EnumName<NetworkKind>, 2> kKinds{{{NetworkKind::net1, "net1"}, {NetworkKind::net3, "net3"}}};
constexpr std::array<EnumName<NormKind>, 3> kNorms{
    {{NormKind::batch, "batch"}, {NormKind::instance, "instance"}, {NormKind::none, "none"}}};
constexpr std::array<EnumName<Conditioning>, 2> kConds{
    {{Conditioning::four_class, "four_class"}, {Conditioning::eight_class, "eight_class"}}};
constexpr std::array<EnumName<AugmentOp>, 5> kOps{{{AugmentOp::affine, "affine"},
                                                   {AugmentOp::elastic, "elastic"},
                                                   {AugmentOp::mirror, "mirror"},
                                                   {AugmentOp::gamma, "gamma"},
                                                   {AugmentOp::crop_nonzero, "crop_nonzero"}}};

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

std::string_view to_string(Profile p) { return enum_to_string(kProfiles, p); }
Profile profile_from_string(std::string_view s) { return enum_from_string(kProfiles, s, "profile"); }
std::string_view to_string(NetworkKind k) { return enum_to_string(kKinds, k); }
NetworkKind network_kind_from_string(std::string_view s) { return enum_from_string(kKinds, s, "network kind"); }
std::string_view to_string(NormKind k) { return enum_to_string(kNorms, k); }
NormKind norm_kind_from_string(std::string_view s) { return enum_from_string(kNorms, s, "norm kind"); }
std::string_view to_string(Conditioning c) { return enum_to_string(kConds, c); }
Conditioning conditioning_from_string(std::string_view s) {
  if (s == "4") return Conditioning::four_class;
  if (s == "8") return Conditioning::eight_class;
  return enum_from_string(kConds, s, "conditioning");
}
std::string_view to_string(AugmentOp op) { return enum_to_string(kOps, op); }
AugmentOp augment_op_from_string(std::string_view s) { return enum_from_string(kOps, s, "augment op"); }

AugmentConfig AugmentConfig::none() {
  AugmentConfig c;
  c.enabled_ops.clear();
  return c;
}

void AugmentConfig::validate() const {
  require(scale_range.lo > 0.0 && scale_range.lo <= scale_range.hi, "augment.scale_range must be positive and ordered");
  require(rotation_deg_range.lo <= rotation_deg_range.hi, "augment.rotation_deg_range must be ordered");
  require(gamma_range.lo > 0.0 && gamma_range.lo <= gamma_range.hi, "augment.gamma_range must be positive and ordered");
  require(mirror_prob >= 0.0 && mirror_prob <= 1.0, "augment.mirror_prob must lie in [0, 1]");
  require(elastic_grid_mm > 0.0, "augment.elastic_grid_mm must be > 0");
  require(elastic_sigma_mm >= 0.0, "augment.elastic_sigma_mm must be >= 0");
}

void UNetSpec::validate() const {
  require(in_channels >= 1, "unet.in_channels must be >= 1");
  require(out_channels == 4 || out_channels == 8, "unet.out_channels must be 4 or 8");
  require(depth >= 1 && depth <= 6, "unet.depth must lie in [1, 6]");
  require(base_channels >= 1, "unet.base_channels must be >= 1");
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, "unet.dropout_rate must lie in [0, 1)");
  require(init_gain > 0.0, "unet.init_gain must be > 0");
}

void SpadeGenSpec::validate() const {
  require(label_channels == 4 || label_channels == 8, "generator label_channels must be 4 or 8");
  require(z_dim >= 1 && base_channels >= 1 && num_upsampling_stages >= 0, "invalid generator spec");
  require(spade_kernel == 1 || spade_kernel == 3, "spade_kernel must be 1 or 3");
  require(param_free_norm != NormKind::none, "generator requires a parameter-free normalization");
}

SegTrainConfig SegTrainConfig::defaults(NetworkKind kind, Profile profile) {
  SegTrainConfig c;
  c.network_kind = kind;
  if (kind == NetworkKind::net1) {
    c.batch_size = 10;
    c.max_epochs = 200;
    c.initial_lr = 1e-4;
    c.dropout_rate = 0.5;
    c.norm_kind = NormKind::batch;
    c.augment.enabled_ops = {AugmentOp::affine, AugmentOp::elastic, AugmentOp::mirror};
  } else {
    c.batch_size = 32;
    c.max_epochs = 500;
    c.initial_lr = 5e-4;
    c.dropout_rate = 0.2;
    c.norm_kind = NormKind::instance;
  }
  c.weight_decay = 5e-5;
  c.lr_plateau_factor = 0.2;
  c.plateau_window_epochs = 30;
  c.min_lr = 1e-6;
  if (profile == Profile::desk) {
    c.input_size = 64;
    c.unet_depth = 4;
    c.unet_base_channels = kind == NetworkKind::net1 ? 32 : 16;
    c.augment.elastic_grid_mm = 80.0;
    c.augment.elastic_sigma_mm = 4.0;
  }
  return c;
}

UNetSpec SegTrainConfig::unet_spec() const {
  UNetSpec s;
  s.in_channels = 1;
  s.out_channels = num_classes();
  s.depth = unet_depth;
  s.base_channels = unet_base_channels;
  s.init_gain = unet_init_gain;
  s.norm_kind = norm_kind;
  s.dropout_rate = dropout_rate;
  return s;
}

void SegTrainConfig::validate() const {
  require(batch_size >= 1, "batch_size must be >= 1");
  require(max_epochs >= 1, "max_epochs must be >= 1");
  require(initial_lr > 0.0, "initial_lr must be > 0");
  require(weight_decay >= 0.0, "weight_decay must be >= 0");
  require(lr_plateau_factor > 0.0 && lr_plateau_factor < 1.0, "lr_plateau_factor must lie in (0, 1)");
  require(plateau_window_epochs >= 1, "plateau_window_epochs must be >= 1");
  require(min_lr > 0.0, "min_lr must be > 0");
  require(ema_decay >= 0.0 && ema_decay < 1.0, "ema_decay must lie in [0, 1)");
  require(input_size >= 8, "input_size must be >= 8");
  require(input_size % (1 << unet_depth) == 0, "input_size must be divisible by 2^unet_depth");
  unet_spec().validate();
  augment.validate();
}

GanTrainConfig GanTrainConfig::defaults(Profile profile) {
  GanTrainConfig c;
  if (profile == Profile::desk) {
    c.batch_size = 4;
    c.z_dim = 16;
    c.input_size = 64;
    c.gen_base_channels = 16;
    c.gen_upsampling_stages = 4;
    c.gen_max_channel_mult = 8;
    c.spade_hidden = 32;
    c.enc_base_channels = 16;
    c.disc_base_channels = 32;
    c.disc_layers = 3;
    c.augment.elastic_grid_mm = 80.0;
    c.augment.elastic_sigma_mm = 4.0;
  }
  c.augment.enabled_ops = {AugmentOp::affine, AugmentOp::elastic};
  return c;
}

SpadeGenSpec GanTrainConfig::generator_spec() const {
  SpadeGenSpec s;
  s.label_channels = label_channels();
  s.z_dim = z_dim;
  s.base_channels = gen_base_channels;
  s.num_upsampling_stages = gen_upsampling_stages;
  s.max_channel_mult = gen_max_channel_mult;
  s.spade_hidden = spade_hidden;
  return s;
}

StyleEncoderSpec GanTrainConfig::encoder_spec() const {
  StyleEncoderSpec s;
  s.base_channels = enc_base_channels;
  s.z_dim = z_dim;
  int n = 0;
  for (int size = input_size; size > 4 && size % 2 == 0; size /= 2) ++n;
  s.num_downsampling = n;
  return s;
}

DiscriminatorSpec GanTrainConfig::discriminator_spec() const {
  DiscriminatorSpec s;
  s.input_channels = 1 + label_channels();
  s.base_channels = disc_base_channels;
  s.num_layers = disc_layers;
  s.num_scales = discriminator_scales;
  return s;
}

void GanTrainConfig::validate() const {
  require(lr > 0.0, "gan.lr must be > 0");
  require(batch_size >= 1, "gan.batch_size must be >= 1");
  require(kl_weight >= 0.0 && feature_matching_weight >= 0.0, "gan loss weights must be >= 0");
  require(perceptual_weight == 0.0, "perceptual loss is not available (requires pretrained weights)");
  require(z_dim >= 1, "gan.z_dim must be >= 1");
  require(discriminator_scales >= 1, "gan.discriminator_scales must be >= 1");
  require(epochs >= 1, "gan.epochs must be >= 1");
  require(input_size % (1 << gen_upsampling_stages) == 0, "input_size must be divisible by 2^gen_upsampling_stages");
  require(disc_layers >= 1, "gan.disc_layers must be >= 1");
  generator_spec().validate();
  augment.validate();
}

Json to_json(const Interval& v) { return Json::array({v.lo, v.hi}); }

Json to_json(const AugmentConfig& c) {
  Json ops = Json::array();
  for (auto op : c.enabled_ops) ops.push_back(std::string(to_string(op)));
  return Json{{"scale_range", to_json(c.scale_range)},
              {"rotation_deg_range", to_json(c.rotation_deg_range)},
              {"elastic_grid_mm", c.elastic_grid_mm},
              {"elastic_sigma_mm", c.elastic_sigma_mm},
              {"mirror_prob", c.mirror_prob},
              {"gamma_range", to_json(c.gamma_range)},
              {"enabled_ops", ops},
              {"seed", c.seed}};
}

AugmentConfig augment_config_from_json(const Json& j, AugmentConfig c) {
  JsonReader r(j, "augment");
  r.get_with("scale_range", [&](const Json& v) { c.scale_range = interval_from_json(v); });
  r.get_with("rotation_deg_range", [&](const Json& v) { c.rotation_deg_range = interval_from_json(v); });
  r.get("elastic_grid_mm", c.elastic_grid_mm);
  r.get("elastic_sigma_mm", c.elastic_sigma_mm);
  r.get("mirror_prob", c.mirror_prob);
  r.get_with("gamma_range", [&](const Json& v) { c.gamma_range = interval_from_json(v); });
  r.get_with("enabled_ops", [&](const Json& v) {
    c.enabled_ops.clear();
    for (const auto& op : v) c.enabled_ops.insert(augment_op_from_string(op.get<std::string>()));
  });
  r.get("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

Json to_json(const UNetSpec& s) {
  return Json{{"in_channels", s.in_channels},   {"out_channels", s.out_channels},
              {"depth", s.depth},               {"base_channels", s.base_channels},
              {"leaky_slope", s.leaky_slope},   {"norm_kind", std::string(to_string(s.norm_kind))},
              {"dropout_rate", s.dropout_rate}, {"init_gain", s.init_gain}};
}

UNetSpec unet_spec_from_json(const Json& j, UNetSpec s) {
  JsonReader r(j, "unet");
  r.get("in_channels", s.in_channels);
  r.get("out_channels", s.out_channels);
  r.get("depth", s.depth);
  r.get("base_channels", s.base_channels);
  r.get("leaky_slope", s.leaky_slope);
  r.get_with("norm_kind", [&](const Json& v) { s.norm_kind = norm_kind_from_string(v.get<std::string>()); });
  r.get("dropout_rate", s.dropout_rate);
  r.get("init_gain", s.init_gain);
  r.finish();
  s.validate();
  return s;
}

Json to_json(const SegTrainConfig& c) {
  return Json{{"schema_version", kSchemaVersion},
              {"network_kind", std::string(to_string(c.network_kind))},
              {"batch_size", c.batch_size},
              {"max_epochs", c.max_epochs},
              {"initial_lr", c.initial_lr},
              {"weight_decay", c.weight_decay},
              {"dropout_rate", c.dropout_rate},
              {"norm_kind", std::string(to_string(c.norm_kind))},
              {"lr_plateau_factor", c.lr_plateau_factor},
              {"plateau_window_epochs", c.plateau_window_epochs},
              {"min_lr", c.min_lr},
              {"ema_decay", c.ema_decay},
              {"plateau_rel_threshold", c.plateau_rel_threshold},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"adam_eps", c.adam_eps},
              {"input_size", c.input_size},
              {"unet_depth", c.unet_depth},
              {"unet_base_channels", c.unet_base_channels},
              {"unet_init_gain", c.unet_init_gain},
              {"seed", c.seed},
              {"augment", to_json(c.augment)}};
}

SegTrainConfig seg_config_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("network_kind")) throw ConfigError("segmentation config requires 'network_kind'");
  const auto kind = network_kind_from_string(j.at("network_kind").get<std::string>());
  Profile profile = Profile::paper;
  if (j.contains("profile")) profile = profile_from_string(j.at("profile").get<std::string>());
  SegTrainConfig c = SegTrainConfig::defaults(kind, profile);
  JsonReader r(j, "seg_config");
  r.ignore("network_kind");
  r.ignore("profile");
  r.get_with("schema_version", [](const Json& v) {
    if (v.get<int>() != kSchemaVersion) throw ConfigError("unsupported schema_version " + v.dump());
  });
  r.get("batch_size", c.batch_size);
  r.get("max_epochs", c.max_epochs);
  r.get("initial_lr", c.initial_lr);
  r.get("weight_decay", c.weight_decay);
  r.get("dropout_rate", c.dropout_rate);
  r.get_with("norm_kind", [&](const Json& v) { c.norm_kind = norm_kind_from_string(v.get<std::string>()); });
  r.get("lr_plateau_factor", c.lr_plateau_factor);
  r.get("plateau_window_epochs", c.plateau_window_epochs);
  r.get("min_lr", c.min_lr);
  r.get("ema_decay", c.ema_decay);
  r.get("plateau_rel_threshold", c.plateau_rel_threshold);
  r.get("adam_beta1", c.adam_beta1);
  r.get("adam_beta2", c.adam_beta2);
  r.get("adam_eps", c.adam_eps);
  r.get("input_size", c.input_size);
  r.get("unet_depth", c.unet_depth);
  r.get("unet_base_channels", c.unet_base_channels);
  r.get("unet_init_gain", c.unet_init_gain);
  r.get("seed", c.seed);
  r.get_with("augment", [&](const Json& v) { c.augment = augment_config_from_json(v, c.augment); });
  r.finish();
  c.validate();
  return c;
}

Json to_json(const GanTrainConfig& c) {
  return Json{{"schema_version", kSchemaVersion},
              {"lr", c.lr},
              {"batch_size", c.batch_size},
              {"kl_weight", c.kl_weight},
              {"feature_matching_weight", c.feature_matching_weight},
              {"perceptual_weight", c.perceptual_weight},
              {"z_dim", c.z_dim},
              {"discriminator_scales", c.discriminator_scales},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"conditioning", std::string(to_string(c.conditioning))},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"adam_eps", c.adam_eps},
              {"input_size", c.input_size},
              {"gen_base_channels", c.gen_base_channels},
              {"gen_upsampling_stages", c.gen_upsampling_stages},
              {"gen_max_channel_mult", c.gen_max_channel_mult},
              {"spade_hidden", c.spade_hidden},
              {"enc_base_channels", c.enc_base_channels},
              {"disc_base_channels", c.disc_base_channels},
              {"disc_layers", c.disc_layers},
              {"augment", to_json(c.augment)}};
}

GanTrainConfig gan_config_from_json(const Json& j) {
  Profile profile = Profile::paper;
  if (j.is_object() && j.contains("profile")) profile = profile_from_string(j.at("profile").get<std::string>());
  GanTrainConfig c = GanTrainConfig::defaults(profile);
  JsonReader r(j, "gan_config");
  r.ignore("profile");
  r.get_with("schema_version", [](const Json& v) {
    if (v.get<int>() != kSchemaVersion) throw ConfigError("unsupported schema_version " + v.dump());
  });
  r.get("lr", c.lr);
  r.get("batch_size", c.batch_size);
  r.get("kl_weight", c.kl_weight);
  r.get("feature_matching_weight", c.feature_matching_weight);
  r.get("perceptual_weight", c.perceptual_weight);
  r.get("z_dim", c.z_dim);
  r.get("discriminator_scales", c.discriminator_scales);
  r.get("epochs", c.epochs);
  r.get("seed", c.seed);
  r.get_with("conditioning", [&](const Json& v) { c.conditioning = conditioning_from_string(v.get<std::string>()); });
  r.get("adam_beta1", c.adam_beta1);
  r.get("adam_beta2", c.adam_beta2);
  r.get("adam_eps", c.adam_eps);
  r.get("input_size", c.input_size);
  r.get("gen_base_channels", c.gen_base_channels);
  r.get("gen_upsampling_stages", c.gen_upsampling_stages);
  r.get("gen_max_channel_mult", c.gen_max_channel_mult);
  r.get("spade_hidden", c.spade_hidden);
  r.get("enc_base_channels", c.enc_base_channels);
  r.get("disc_base_channels", c.disc_base_channels);
  r.get("disc_layers", c.disc_layers);
  r.get_with("augment", [&](const Json& v) { c.augment = augment_config_from_json(v, c.augment); });
  r.finish();
  c.validate();
  return c;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace cardiosynth
