#include "cardiosynth/infer/infer.hpp"

#include <algorithm>
#include <cmath>

#include "cardiosynth/core/config.hpp"
#include "cardiosynth/core/error.hpp"
#include "cardiosynth/core/rng.hpp"
#include "cardiosynth/nn/ops.hpp"
#include "cardiosynth/preprocess/preprocess.hpp"
#include "cardiosynth/train/train.hpp"

namespace cardiosynth::infer {

using nn::Shape;
using nn::Tensor;

namespace {

constexpr int kChunk = 8;

LabelMap predict(nets::UNet& net, const Volume& vol, int input_size, SchemeKind scheme) {
  const int classes = LabelScheme::of(scheme).num_classes();
  if (net.spec().out_channels != classes)
    throw ConfigError("network predicts " + std::to_string(net.spec().out_channels) + " classes, expected " +
                      std::to_string(classes));
  const Shape3 s = vol.shape();
  if (s.rows != input_size || s.cols != input_size)
    throw ShapeError("volume is " + std::to_string(s.rows) + "x" + std::to_string(s.cols) + ", network expects " +
                     std::to_string(input_size) + "x" + std::to_string(input_size));
  LabelMap out;
  out.labels = Grid3<std::uint8_t>(s);
  out.scheme = scheme;
  out.spacing = vol.spacing;
  out.phase = vol.phase;
  out.subject_id = vol.subject_id;
  nn::NoGradGuard ng;
  const std::size_t plane = s.slice_voxels();
  for (int k0 = 0; k0 < s.slices; k0 += kChunk) {
    const int n = std::min(kChunk, s.slices - k0);
    std::vector<float> x;
    x.reserve(n * plane);
    for (int k = k0; k < k0 + n; ++k) x.insert(x.end(), vol.voxels.slice(k).begin(), vol.voxels.slice(k).end());
    const Tensor y = net.forward(Tensor::from(Shape{n, 1, s.rows, s.cols}, std::move(x)), false);
    for (int i = 0; i < n; ++i) {
      const auto lab = argmax_channels(y.ptr() + static_cast<std::size_t>(i) * classes * plane, classes, plane);
      std::copy(lab.begin(), lab.end(), out.labels.slice(k0 + i).begin());
    }
  }
  return out;
}

int checkpoint_size(const Checkpoint& ckpt) { return seg_config_from_json(ckpt.config()).input_size; }

}  // namespace

std::vector<std::uint8_t> argmax_channels(const float* logits, int classes, std::size_t plane) {
  std::vector<std::uint8_t> out(plane, 0);
  for (std::size_t i = 0; i < plane; ++i) {
    float best = logits[i];
    for (int c = 1; c < classes; ++c) {
      const float v = logits[static_cast<std::size_t>(c) * plane + i];
      if (v > best) {
        best = v;
        out[i] = static_cast<std::uint8_t>(c);
      }
    }
  }
  return out;
}

LabelMap predict_multitissue(nets::UNet& net, const Volume& vol, int input_size) {
  return predict(net, vol, input_size, SchemeKind::EightClass);
}

LabelMap predict_multitissue(const Checkpoint& ckpt, const Volume& vol) {
  if (ckpt.network_kind != "net1") throw FormatError("predict-tissue needs a net1 checkpoint, got " + ckpt.network_kind);
  auto net = train::load_unet(ckpt);
  return predict_multitissue(*net, vol, checkpoint_size(ckpt));
}

LabelMap segment_cardiac(nets::UNet& net, const Volume& vol, int input_size) {
  return predict(net, vol, input_size, SchemeKind::FourClass);
}

LabelMap segment_cardiac(const Checkpoint& ckpt, const Volume& vol) {
  if (ckpt.network_kind != "net3") throw FormatError("segment needs a net3 checkpoint, got " + ckpt.network_kind);
  auto net = train::load_unet(ckpt);
  return segment_cardiac(*net, vol, checkpoint_size(ckpt));
}

std::vector<std::uint8_t> predict_slices(nets::UNet& net, const std::vector<augment::SlicePair>& slices) {
  std::vector<std::uint8_t> out;
  if (slices.empty()) return out;
  nn::NoGradGuard ng;
  const int classes = net.spec().out_channels;
  for (std::size_t k0 = 0; k0 < slices.size(); k0 += kChunk) {
    const std::size_t n = std::min<std::size_t>(kChunk, slices.size() - k0);
    std::vector<const augment::SlicePair*> batch;
    for (std::size_t i = 0; i < n; ++i) batch.push_back(&slices[k0 + i]);
    const Tensor y = net.forward(train::image_batch(batch), false);
    const std::size_t plane = static_cast<std::size_t>(slices[k0].rows) * slices[k0].cols;
    for (std::size_t i = 0; i < n; ++i) {
      const auto lab = argmax_channels(y.ptr() + i * classes * plane, classes, plane);
      out.insert(out.end(), lab.begin(), lab.end());
    }
  }
  return out;
}

SynthMode synth_mode_from_string(std::string_view s) {
  if (s == "4" || s == "four_class") return SynthMode::four_class;
  if (s == "8" || s == "eight_class") return SynthMode::eight_class;
  throw ConfigError("unknown synthesis mode '" + std::string(s) + "' (expected 4 or 8)");
}

std::string_view to_string(SynthMode m) { return m == SynthMode::four_class ? "four_class" : "eight_class"; }

SynthResult synthesize_volume(nets::SpadeGenerator& gen, nets::StyleEncoder& enc, const LabelMap& labels,
                              const Volume* style, SynthMode mode, const SynthOptions& opts) {
  SynthResult r;
  if (mode == SynthMode::four_class) {
    if (!style) throw ConfigError("four_class synthesis requires a style image");
    r.labels = labels.scheme == SchemeKind::EightClass ? preprocess::to_four_class(labels) : labels;
  } else {
    if (labels.scheme != SchemeKind::EightClass)
      throw ConfigError("eight_class synthesis needs EightClass labels, got " + std::string(to_string(labels.scheme)));
    r.labels = labels;
  }
  const int classes = r.labels.label_scheme().num_classes();
  if (gen.spec().label_channels != classes)
    throw ConfigError("generator is conditioned on " + std::to_string(gen.spec().label_channels) +
                      " classes, synthesis mode gives " + std::to_string(classes));
  const Shape3 s = r.labels.shape();
  const int size = gen.input_size();
  if (s.rows != size || s.cols != size)
    throw ShapeError("label map is " + std::to_string(s.rows) + "x" + std::to_string(s.cols) + ", generator expects " +
                     std::to_string(size) + "x" + std::to_string(size));
  const int zd = gen.spec().z_dim;
  nn::NoGradGuard ng;

  // Posterior of the style volume, averaged over its slices; standard normal without a style.
  std::vector<double> mu(zd, 0.0), logvar(zd, 0.0);
  if (style) {
    const Shape3 ss = style->shape();
    if (ss.rows != enc.input_size() || ss.cols != enc.input_size())
      throw ShapeError("style image is " + std::to_string(ss.rows) + "x" + std::to_string(ss.cols) +
                       ", encoder expects " + std::to_string(enc.input_size()));
    std::vector<float> x(style->voxels.values().begin(), style->voxels.values().end());
    const auto code = enc.encode(Tensor::from(Shape{ss.slices, 1, ss.rows, ss.cols}, std::move(x)), nullptr, true);
    for (int k = 0; k < ss.slices; ++k)
      for (int i = 0; i < zd; ++i) {
        mu[i] += code.mu.ptr()[k * zd + i] / ss.slices;
        logvar[i] += code.logvar.ptr()[k * zd + i] / ss.slices;
      }
  }
  Rng rng(derive_seed(opts.seed, 0x53594eULL));
  auto draw = [&]() {
    std::vector<float> z(zd);
    for (int i = 0; i < zd; ++i) z[i] = static_cast<float>(mu[i] + std::exp(0.5 * logvar[i]) * rng.normal());
    return z;
  };
  const std::vector<float> shared = draw();

  r.image.voxels = Grid3<double>(s);
  r.image.spacing = r.labels.spacing;
  r.image.phase = r.labels.phase;
  r.image.subject_id = r.labels.subject_id;
  r.image.normalized = true;
  const std::size_t plane = s.slice_voxels();
  for (int k = 0; k < s.slices; ++k) {
    std::vector<float> oh(static_cast<std::size_t>(classes) * plane, 0.0f);
    preprocess::one_hot_slice(r.labels, k, classes, oh.data());
    const std::vector<float> z = opts.z_mode == ZMode::shared ? shared : draw();
    const Tensor y = gen.forward(Tensor::from(Shape{1, classes, s.rows, s.cols}, std::move(oh)),
                                 Tensor::from(Shape{1, zd, 1, 1}, z), false);
    auto dst = r.image.voxels.slice(k);
    for (std::size_t i = 0; i < plane; ++i) dst[i] = std::clamp(static_cast<double>(y.ptr()[i]), -1.0, 1.0);
  }
  return r;
}

SynthResult synthesize_volume(const Checkpoint& gen, const Checkpoint& enc, const LabelMap& labels, const Volume* style,
                              SynthMode mode, const SynthOptions& opts) {
  auto g = train::load_generator(gen);
  auto e = train::load_encoder(enc);
  return synthesize_volume(*g, *e, labels, style, mode, opts);
}

}  // namespace cardiosynth::infer
