#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "cardiosynth/core/config.hpp"
#include "cardiosynth/nn/layers.hpp"

namespace cardiosynth::nets {

using nn::Tensor;

/// Encoder-decoder segmentation network (networks 1 and 3).
class UNet {
 public:
  UNet(const UNetSpec& spec, std::uint64_t seed);

  /// (B, in, H, W) -> (B, out, H, W) logits; H, W must be divisible by 2^depth.
  Tensor forward(const Tensor& x, bool training, Rng* dropout_rng = nullptr);
  const UNetSpec& spec() const { return spec_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }
  /// Test hook: makes every kernel left-right symmetric.
  void symmetrize_kernels();

 private:
  struct Block {
    nn::Conv2d c1, c2;
    nn::Norm n1, n2;
    Tensor g1, b1, g2, b2;
  };
  Block make_block(const std::string& name, int cin, int cout, Rng& rng);
  Tensor run_block(const Block& b, Tensor x, bool training);
  Tensor norm_act(const nn::Norm& n, const Tensor& g, const Tensor& b, Tensor x, bool training);

  UNetSpec spec_;
  nn::ParamStore store_;
  std::vector<Block> down_;
  Block bottom_;
  std::vector<nn::Conv2d> up_conv_;
  std::vector<Block> up_;
  nn::Conv2d head_;
};

std::unique_ptr<UNet> build_unet(const UNetSpec& spec, std::uint64_t seed);

/// Spatially-adaptive denormalization: PFN(x) * (1 + gamma(m)) + beta(m).
class SpadeNorm {
 public:
  SpadeNorm() = default;
  SpadeNorm(nn::ParamStore& store, const std::string& name, int channels, int label_channels, int hidden, int kernel,
            NormKind pfn, Rng& rng);
  /// `onehot` is resized to the feature size by nearest interpolation.
  Tensor forward(const Tensor& x, const Tensor& onehot, bool training) const;
  void zero_init_heads();
  int channels() const { return channels_; }

 private:
  int channels_ = 0;
  nn::Norm pfn_;
  nn::Conv2d shared_, gamma_, beta_;
};

Tensor spade_modulate(const SpadeNorm& layer, const Tensor& features, const Tensor& onehot, bool training);

class SpadeGenerator {
 public:
  SpadeGenerator(const SpadeGenSpec& spec, int input_size, std::uint64_t seed);

  /// onehot (B, K, H, W), z (B, z_dim) -> image (B, 1, H, W) in [-1, 1].
  Tensor forward(const Tensor& onehot, const Tensor& z, bool training);
  const SpadeGenSpec& spec() const { return spec_; }
  int input_size() const { return input_size_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }
  int channels_at(int stage) const;

 private:
  struct ResBlock {
    SpadeNorm n0, n1, ns;
    nn::Conv2d c0, c1, cs;
    bool learned_shortcut = false;
  };
  ResBlock make_block(const std::string& name, int cin, int cout, Rng& rng);
  Tensor run_block(const ResBlock& b, const Tensor& x, const Tensor& onehot, bool training) const;

  SpadeGenSpec spec_;
  int input_size_;
  nn::ParamStore store_;
  nn::Linear fc_;
  std::vector<ResBlock> blocks_;
  nn::Conv2d out_;
};

Tensor generator_forward(SpadeGenerator& g, const Tensor& onehot, const Tensor& z, bool training = false);

struct StyleCode {
  Tensor mu;
  Tensor logvar;
  Tensor z;
};

/// Strided-convolution encoder with mu / logvar heads; no normalization layers.
class StyleEncoder {
 public:
  StyleEncoder(const StyleEncoderSpec& spec, int input_size, std::uint64_t seed);

  /// z = mu + exp(0.5 logvar) * eps, eps ~ N(0, 1) from `rng`; deterministic mode returns z = mu.
  StyleCode encode(const Tensor& image, Rng* rng, bool deterministic = false);
  const StyleEncoderSpec& spec() const { return spec_; }
  int input_size() const { return input_size_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }

 private:
  StyleEncoderSpec spec_;
  int input_size_;
  nn::ParamStore store_;
  std::vector<nn::Conv2d> convs_;
  nn::Linear mu_, logvar_;
};

StyleCode style_encode(StyleEncoder& e, const Tensor& image, Rng* rng, bool deterministic = false);

struct DiscOutput {
  /// features[scale][layer]
  std::vector<std::vector<Tensor>> features;
  std::vector<Tensor> logits;
};

/// Multiscale patch discriminator on concat(image, onehot).
class Discriminator {
 public:
  Discriminator(const DiscriminatorSpec& spec, std::uint64_t seed);

  DiscOutput forward(const Tensor& image, const Tensor& onehot);
  const DiscriminatorSpec& spec() const { return spec_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }

 private:
  struct Scale {
    std::vector<nn::Conv2d> convs;
    nn::Conv2d logit;
  };
  DiscriminatorSpec spec_;
  nn::ParamStore store_;
  std::vector<Scale> scales_;
};

DiscOutput discriminator_forward(Discriminator& d, const Tensor& image, const Tensor& onehot);

inline constexpr float kGanSlope = 0.2f;

}  // namespace cardiosynth::nets
