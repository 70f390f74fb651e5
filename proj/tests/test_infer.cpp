#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "cardiosynth/core/error.hpp"
#include "cardiosynth/infer/infer.hpp"
#include "cardiosynth/metrics/metrics.hpp"
#include "cardiosynth/nets/nets.hpp"
#include "support/tiny.hpp"

using namespace cardiosynth;
using namespace cardiosynth::infer;
using namespace test_support;

namespace {

UNetSpec tiny_unet(int classes) {
  UNetSpec s;
  s.out_channels = classes;
  s.depth = 2;
  s.base_channels = 2;
  return s;
}

Volume constant_volume(Shape3 s, double v) {
  Volume vol;
  vol.voxels = Grid3<double>(s);
  for (auto& x : vol.voxels.values()) x = v;
  vol.spacing = Spacing(10.4, 10.4, 10.0);
  vol.normalized = true;
  return vol;
}

}  // namespace

TEST_SUITE("infer") {
  TEST_CASE("argmax ties go to the lower id") {
    // 3 classes x 4 pixels, planar layout
    const std::vector<float> logits{1, 0, 2, 5,  //
                                    1, 3, 2, 5,  //
                                    0, 3, 2, 5};
    CHECK(argmax_channels(logits.data(), 3, 4) == std::vector<std::uint8_t>{0, 1, 0, 0});
    const std::vector<float> last{0, 0, 1};
    CHECK(argmax_channels(last.data(), 3, 1) == std::vector<std::uint8_t>{2});
  }

  TEST_CASE("tissue and cardiac prediction contracts") {
    nets::UNet net8(tiny_unet(8), 3);
    nets::UNet net4(tiny_unet(4), 3);
    for (double c : {-1.0, 0.0, 1.0}) {
      const auto vol = constant_volume(Shape3{3, 32, 32}, c);
      const auto t = predict_multitissue(net8, vol, 32);
      CHECK(t.scheme == SchemeKind::EightClass);
      CHECK(t.shape() == vol.shape());
      for (auto l : t.labels.values()) REQUIRE(l < 8);
      const auto s = segment_cardiac(net4, vol, 32);
      CHECK(s.scheme == SchemeKind::FourClass);
      for (auto l : s.labels.values()) REQUIRE(l < 4);
    }
    const auto lab = phantom_labels(3, Phase::ED, 10);
    const auto img = phantom_image(lab, 4);
    const auto a = predict_multitissue(net8, img, 32);
    CHECK(a.labels.values() == predict_multitissue(net8, img, 32).labels.values());
    CHECK(a.spacing == img.spacing);
    CHECK(segment_cardiac(net4, img, 32).labels.values() == segment_cardiac(net4, img, 32).labels.values());

    CHECK_THROWS_AS(predict_multitissue(net8, constant_volume(Shape3{2, 48, 48}, 0.0), 32), ShapeError);
    CHECK_THROWS_AS(predict_multitissue(net4, img, 32), ConfigError);
    CHECK_THROWS_AS(segment_cardiac(net8, img, 32), ConfigError);
  }

  TEST_CASE("all background against all background uses the empty conventions") {
    nets::UNet net(tiny_unet(4), 8);
    for (auto [name, t] : net.params().params()) {
      if (name == "head.weight" || name == "head.bias") std::fill(t.data().begin(), t.data().end(), 0.0f);
      if (name == "head.bias") t.data()[0] = 5.0f;
    }
    const auto img = phantom_image(phantom_labels(9, Phase::ED), 10);
    const auto pred = segment_cardiac(net, img, 32);
    LabelMap gt = pred;
    for (auto& l : gt.labels.values()) l = 0;
    CHECK(pred.labels.values() == gt.labels.values());
    const auto rows = metrics::evaluate(pred, gt, gt.spacing);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) {
      CHECK(r.dsc == 1.0);
      CHECK(r.hd_mm == 0.0);
    }
  }

  TEST_CASE("synthesis contract") {
    auto models4 = train::build_gan(tiny_gan_config(Conditioning::four_class));
    auto models8 = train::build_gan(tiny_gan_config(Conditioning::eight_class));
    const auto lab = phantom_labels(11, Phase::ES, 10);
    const auto style = phantom_image(phantom_labels(12, Phase::ED, 6), 13);
    SynthOptions opts;
    opts.seed = 21;

    auto r8 = synthesize_volume(*models8.generator, *models8.encoder, lab, &style, SynthMode::eight_class, opts);
    CHECK(r8.image.shape() == lab.shape());
    CHECK(r8.image.spacing == lab.spacing);
    for (double v : r8.image.voxels.values()) REQUIRE(std::abs(v) <= 1.0);
    CHECK(r8.labels.labels.values() == lab.labels.values());
    CHECK(r8.labels.scheme == SchemeKind::EightClass);
    auto again = synthesize_volume(*models8.generator, *models8.encoder, lab, &style, SynthMode::eight_class, opts);
    CHECK(again.image.voxels.values() == r8.image.voxels.values());
    SynthOptions other = opts;
    other.seed = 22;
    CHECK(synthesize_volume(*models8.generator, *models8.encoder, lab, &style, SynthMode::eight_class, other)
              .image.voxels.values() != r8.image.voxels.values());

    auto prior = synthesize_volume(*models8.generator, *models8.encoder, lab, nullptr, SynthMode::eight_class, opts);
    for (double v : prior.image.voxels.values()) REQUIRE(std::abs(v) <= 1.0);

    auto r4 = synthesize_volume(*models4.generator, *models4.encoder, lab, &style, SynthMode::four_class, opts);
    CHECK(r4.labels.scheme == SchemeKind::FourClass);
    CHECK(r4.labels.labels.values() == preprocess::to_four_class(lab).labels.values());
    CHECK(r4.image.shape() == lab.shape());

    CHECK_THROWS_AS(synthesize_volume(*models4.generator, *models4.encoder, lab, nullptr, SynthMode::four_class, opts),
                    ConfigError);
    const auto four = preprocess::to_four_class(lab);
    CHECK_THROWS_AS(synthesize_volume(*models8.generator, *models8.encoder, four, &style, SynthMode::eight_class, opts),
                    ConfigError);
    CHECK_THROWS_AS(synthesize_volume(*models8.generator, *models8.encoder, lab, &style, SynthMode::four_class, opts),
                    ConfigError);
    CHECK(synth_mode_from_string("4") == SynthMode::four_class);
    CHECK(synth_mode_from_string("8") == SynthMode::eight_class);
    CHECK_THROWS_AS(synth_mode_from_string("5"), ConfigError);
  }

  TEST_CASE("shared code gives one style per volume") {
    auto models = train::build_gan(tiny_gan_config(Conditioning::eight_class));
    // identical label slices isolate the effect of the style code
    auto lab = phantom_labels(30, Phase::ED, 6);
    for (int k = 1; k < 6; ++k)
      std::copy(lab.labels.slice(0).begin(), lab.labels.slice(0).end(), lab.labels.slice(k).begin());
    const auto style = phantom_image(lab, 31);
    SynthOptions shared{ZMode::shared, 5}, per{ZMode::per_slice, 5};
    auto a = synthesize_volume(*models.generator, *models.encoder, lab, &style, SynthMode::eight_class, shared);
    auto b = synthesize_volume(*models.generator, *models.encoder, lab, &style, SynthMode::eight_class, per);
    std::set<std::vector<double>> sa, sb;
    for (int k = 0; k < 6; ++k) {
      sa.insert(std::vector<double>(a.image.voxels.slice(k).begin(), a.image.voxels.slice(k).end()));
      sb.insert(std::vector<double>(b.image.voxels.slice(k).begin(), b.image.voxels.slice(k).end()));
    }
    CHECK(sa.size() == 1);
    CHECK(sb.size() == 6);
  }

  TEST_CASE("checkpoint overloads match the in-memory models") {
    const auto gan = tiny_gan_ckpts(Conditioning::eight_class);
    auto g = train::load_generator(gan.generator);
    auto e = train::load_encoder(gan.encoder);
    const auto lab = phantom_labels(40, Phase::ED, 4);
    SynthOptions opts{ZMode::shared, 3};
    CHECK(synthesize_volume(gan.generator, gan.encoder, lab, nullptr, SynthMode::eight_class, opts)
              .image.voxels.values() ==
          synthesize_volume(*g, *e, lab, nullptr, SynthMode::eight_class, opts).image.voxels.values());
    CHECK_THROWS_AS(predict_multitissue(gan.generator, phantom_image(lab, 1)), FormatError);
  }
}
