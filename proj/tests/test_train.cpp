#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "cardiosynth/core/error.hpp"
#include "cardiosynth/core/nifti.hpp"
#include "cardiosynth/infer/infer.hpp"
#include "cardiosynth/phantom/phantom.hpp"
#include "cardiosynth/preprocess/preprocess.hpp"
#include "cardiosynth/train/train.hpp"
#include "support/tmp_dir.hpp"

using namespace cardiosynth;
using namespace cardiosynth::train;
namespace fs = std::filesystem;

namespace {

using test_support::tmp_dir;

std::vector<Sample> phantom_samples(int size, int slices, SchemeKind scheme, std::uint64_t seed, int group = 0) {
  auto params = phantom::sample_params(seed);
  // Field of view is fixed at 332.8 mm.
  auto lab = phantom::render_labels(params, Shape3{std::max(slices, 4), size, size}, Spacing(332.8 / size, 332.8 / size, 10.0));
  auto vol = phantom::simulate_contrast(lab, phantom::TissueSignalTable{}, seed + 1);
  std::vector<Sample> out;
  for (int k = 0; k < slices; ++k) {
    Sample s;
    s.group = group;
    s.pair.rows = s.pair.cols = size;
    s.pair.pixel_mm = 332.8 / size;
    s.pair.image.assign(vol.voxels.slice(k).begin(), vol.voxels.slice(k).end());
    for (auto l : lab.labels.slice(k))
      s.pair.labels.push_back(scheme == SchemeKind::FourClass ? preprocess::to_four_class_id(l) : l);
    out.push_back(std::move(s));
  }
  return out;
}

SegTrainConfig tiny_seg(NetworkKind kind) {
  auto c = SegTrainConfig::defaults(kind, Profile::desk);
  c.input_size = 32;
  c.unet_depth = 2;
  c.unet_base_channels = 2;
  c.batch_size = 4;
  c.augment = AugmentConfig::none();
  c.seed = 5;
  return c;
}

GanTrainConfig tiny_gan() {
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
  c.epochs = 2;
  c.seed = 9;
  return c;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("plateau schedule") {
    auto cfg = SegTrainConfig::defaults(NetworkKind::net3);
    TrainState s = initial_state(cfg.initial_lr, 0);
    for (int e = 1; e <= 100; ++e) s = plateau_step(s, 10.0 * std::pow(0.99, e), cfg);
    CHECK(s.lr == cfg.initial_lr);

    TrainState c = initial_state(5e-4, 0);
    int first = 0;
    for (int e = 1; e <= 40 && !first; ++e) {
      c = plateau_step(c, 1.0, cfg);
      if (c.lr < 5e-4) first = e;
    }
    CHECK(first == 31);
    CHECK(c.lr == doctest::Approx(1e-4).epsilon(1e-12));
  }

  TEST_CASE("stopping rule") {
    auto cfg = SegTrainConfig::defaults(NetworkKind::net3);
    TrainState s = initial_state(9e-7, 0);
    s.epoch = 3;
    CHECK(should_stop(s, cfg));
    s.lr = 1e-4;
    s.epoch = 500;
    CHECK(should_stop(s, cfg));
    s.epoch = 10;
    CHECK_FALSE(should_stop(s, cfg));
  }

  TEST_CASE("stratified epoch order is a deterministic permutation") {
    std::vector<Sample> d;
    for (int g = 0; g < 3; ++g)
      for (int k = 0; k < 4; ++k) d.push_back(Sample{{}, g});
    auto a = epoch_order(d, 1), b = epoch_order(d, 1), c = epoch_order(d, 2);
    CHECK(a == b);
    CHECK(a != c);
    auto sorted = a;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
    // The first three picks come from three different volumes.
    CHECK(d[a[0]].group != d[a[1]].group);
    CHECK(d[a[1]].group != d[a[2]].group);
    CHECK(d[a[0]].group != d[a[2]].group);
  }

  TEST_CASE("net3 constant-loss run follows the decay sequence and stops") {
    auto cfg = tiny_seg(NetworkKind::net3);
    auto data = phantom_samples(32, 1, SchemeKind::FourClass, 3);
    TrainOptions opts;
    opts.epoch_loss_hook = [](int, double) { return 0.7; };
    const auto log = tmp_dir("train_lr") / "log.jsonl";
    opts.log_path = log.string();
    auto r = train_segmentation(cfg, data, opts);
    std::vector<double> lrs;
    for (const auto& h : r.state.history)
      if (lrs.empty() || h.lr != lrs.back()) lrs.push_back(h.lr);
    const std::vector<double> expect{5e-4, 1e-4, 2e-5, 4e-6, 8e-7};
    REQUIRE(lrs.size() == 4);
    for (std::size_t i = 0; i < lrs.size(); ++i) CHECK(lrs[i] == doctest::Approx(expect[i]).epsilon(1e-9));
    CHECK(r.state.lr == doctest::Approx(8e-7).epsilon(1e-9));
    CHECK(r.state.epoch == 121);
    CHECK(r.state.history.size() == 121);
    for (std::size_t i = 1; i < r.state.history.size(); ++i) CHECK(r.state.history[i].lr <= r.state.history[i - 1].lr);
    std::ifstream in(log);
    int lines = 0;
    for (std::string line; std::getline(in, line);) {
      ++lines;
      auto j = Json::parse(line);
      CHECK(j.contains("wall_time"));
      CHECK(j["losses"].contains("ce"));
    }
    CHECK(lines == 121);
  }

  TEST_CASE("net1 runs exactly max_epochs at constant lr and is reproducible") {
    auto cfg = tiny_seg(NetworkKind::net1);
    cfg.max_epochs = 3;
    cfg.augment = SegTrainConfig::defaults(NetworkKind::net1, Profile::desk).augment;
    std::vector<Sample> data = phantom_samples(32, 3, SchemeKind::EightClass, 4, 0);
    auto more = phantom_samples(32, 3, SchemeKind::EightClass, 5, 1);
    data.insert(data.end(), more.begin(), more.end());
    auto a = train_segmentation(cfg, data);
    auto b = train_segmentation(cfg, data);
    REQUIRE(a.state.history.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(a.state.history[i].train_loss == b.state.history[i].train_loss);
      CHECK(a.state.history[i].lr == cfg.initial_lr);
      const auto& bd = a.state.history[i].breakdown;
      CHECK(std::abs(bd["ce"].get<double>() + bd["dice"].get<double>() - a.state.history[i].train_loss) < 1e-6);
    }
    CHECK(a.checkpoint.blob == b.checkpoint.blob);
    CHECK(serialize_checkpoint(a.checkpoint) == serialize_checkpoint(b.checkpoint));
    CHECK(seg_config_from_json(a.checkpoint.config()) == cfg);

    auto loaded = load_unet(a.checkpoint);
    std::vector<augment::SlicePair> sl;
    for (const auto& s : data) sl.push_back(s.pair);
    CHECK(infer::predict_slices(*loaded, sl) == infer::predict_slices(*a.model, sl));
  }

  TEST_CASE("divergence and bad inputs") {
    auto cfg = tiny_seg(NetworkKind::net1);
    cfg.max_epochs = 2;
    auto data = phantom_samples(32, 1, SchemeKind::EightClass, 6);
    TrainOptions opts;
    opts.epoch_loss_hook = [](int, double) { return std::numeric_limits<double>::quiet_NaN(); };
    CHECK_THROWS_AS(train_segmentation(cfg, data, opts), TrainingDiverged);
    CHECK_THROWS_AS(train_segmentation(cfg, std::vector<Sample>{}), ConfigError);
    auto big = phantom_samples(64, 1, SchemeKind::EightClass, 6);
    CHECK_THROWS_AS(train_segmentation(cfg, big), ShapeError);
    auto c3 = tiny_seg(NetworkKind::net3);
    CHECK_THROWS_AS(train_segmentation(c3, data), ValueError);
  }

  TEST_CASE("training from a manifest") {
    const auto dir = tmp_dir("train_manifest");
    auto params = phantom::sample_params(8);
    auto lab = phantom::render_labels(params, Shape3{4, 32, 32}, Spacing(10.4, 10.4, 10.0));
    auto vol = phantom::simulate_contrast(lab, phantom::TissueSignalTable{}, 1);
    nifti::write_volume(vol, (dir / "img.nii.gz").string());
    nifti::write_labels(lab, (dir / "lab.nii.gz").string());
    DatasetManifest m;
    m.base_dir = dir.string();
    m.entries.push_back({"img.nii.gz", "lab.nii.gz", SchemeKind::EightClass, Role::train_net3, "phantom"});
    auto cfg = tiny_seg(NetworkKind::net3);
    cfg.max_epochs = 1;
    auto r = train_segmentation(cfg, m, AugmentConfig::none());
    CHECK(r.state.epoch == 1);
    auto cfg1 = tiny_seg(NetworkKind::net1);
    CHECK_THROWS_AS(train_segmentation(cfg1, m, AugmentConfig::none()), ConfigError);
  }

  TEST_CASE("gan training loop") {
    auto cfg = tiny_gan();
    auto data = phantom_samples(32, 4, SchemeKind::EightClass, 10);
    TrainOptions opts;
    const auto log = tmp_dir("train_gan") / "gan.jsonl";
    opts.log_path = log.string();
    auto a = train_gan(cfg, data, opts);
    auto b = train_gan(cfg, data);
    REQUIRE(a.state.history.size() == 2);
    CHECK(a.state.history[0].train_loss == b.state.history[0].train_loss);
    for (const auto& h : a.state.history) {
      const auto& bd = h.breakdown;
      CHECK(bd["kl_weight"].get<double>() == 0.5);
      const double sum = bd["hinge_g"].get<double>() + bd["feature_matching"].get<double>() +
                         0.5 * bd["kl"].get<double>();
      CHECK(std::abs(sum - bd["g_total"].get<double>()) < 1e-6);
    }
    std::ifstream in(log);
    std::string line;
    std::getline(in, line);
    CHECK(Json::parse(line)["losses"]["kl_weight"] == 0.5);
    CHECK(gan_config_from_json(a.generator.config()) == cfg);
    auto g = load_generator(a.generator);
    CHECK(g->params().serialize() == a.models.generator->params().serialize());
    CHECK_NOTHROW(load_encoder(a.encoder));
    CHECK_NOTHROW(load_discriminator(a.discriminator));
    CHECK_THROWS_AS(load_generator(a.encoder), FormatError);

    auto four = cfg;
    four.conditioning = Conditioning::four_class;
    four.epochs = 1;
    CHECK_THROWS_AS(train_gan(four, phantom_samples(32, 2, SchemeKind::EightClass, 11)), ValueError);
    CHECK_NOTHROW(train_gan(four, phantom_samples(32, 2, SchemeKind::FourClass, 11)));
  }
}
