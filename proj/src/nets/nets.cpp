#include "cardiosynth/nets/nets.hpp"

#include <algorithm>
#include <cmath>

#include "cardiosynth/core/error.hpp"

namespace cardiosynth::nets {

using nn::Conv2d;
using nn::Shape;

namespace {

Tensor ones(nn::ParamStore& s, const std::string& name, int c) {
  return s.add(name, Shape{1, c, 1, 1}, std::vector<float>(static_cast<std::size_t>(c), 1.0f));
}
Tensor zeros(nn::ParamStore& s, const std::string& name, int c) {
  return s.add(name, Shape{1, c, 1, 1}, std::vector<float>(static_cast<std::size_t>(c), 0.0f));
}

}  // namespace

UNet::Block UNet::make_block(const std::string& name, int cin, int cout, Rng& rng) {
  const bool bias = spec_.norm_kind == NormKind::none;
  Block b;
  b.c1 = Conv2d(store_, name + ".conv1", cin, cout, 3, 1, rng, bias);
  b.n1 = nn::Norm(store_, name + ".norm1", spec_.norm_kind, cout);
  b.c2 = Conv2d(store_, name + ".conv2", cout, cout, 3, 1, rng, bias);
  b.n2 = nn::Norm(store_, name + ".norm2", spec_.norm_kind, cout);
  if (!bias) {
    b.g1 = ones(store_, name + ".norm1.gamma", cout);
    b.b1 = zeros(store_, name + ".norm1.beta", cout);
    b.g2 = ones(store_, name + ".norm2.gamma", cout);
    b.b2 = zeros(store_, name + ".norm2.beta", cout);
  }
  return b;
}

UNet::UNet(const UNetSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  Rng rng(derive_seed(seed, 0x554eULL));
  int c = spec_.in_channels;
  for (int l = 0; l < spec_.depth; ++l) {
    const int w = spec_.base_channels << l;
    down_.push_back(make_block("down" + std::to_string(l), c, w, rng));
    c = w;
  }
  bottom_ = make_block("bottom", c, spec_.base_channels << spec_.depth, rng);
  c = spec_.base_channels << spec_.depth;
  for (int l = spec_.depth - 1; l >= 0; --l) {
    const int w = spec_.base_channels << l;
    up_conv_.push_back(Conv2d(store_, "upconv" + std::to_string(l), c, w, 3, 1, rng, true));
    up_.push_back(make_block("up" + std::to_string(l), 2 * w, w, rng));
    c = w;
  }
  head_ = Conv2d(store_, "head", c, spec_.out_channels, 1, 1, rng, true);
  const auto gain = static_cast<float>(spec_.init_gain);
  for (auto [name, t] : store_.params())
    if (name.ends_with(".weight") && !name.starts_with("head"))
      for (float& w : t.data()) w *= gain;
}

Tensor UNet::norm_act(const nn::Norm& n, const Tensor& g, const Tensor& b, Tensor x, bool training) {
  if (n.kind != NormKind::none) x = nn::channel_affine(n(x, training), g, b);
  return nn::leaky_relu(x, static_cast<float>(spec_.leaky_slope));
}

Tensor UNet::run_block(const Block& b, Tensor x, bool training) {
  x = norm_act(b.n1, b.g1, b.b1, b.c1(x), training);
  return norm_act(b.n2, b.g2, b.b2, b.c2(x), training);
}

Tensor UNet::forward(const Tensor& x, bool training, Rng* dropout_rng) {
  const Shape s = x.shape();
  const int div = 1 << spec_.depth;
  if (s.c != spec_.in_channels) throw ShapeError("unet: expected " + std::to_string(spec_.in_channels) + " input channels");
  if (s.h % div || s.w % div)
    throw ShapeError("unet: spatial size " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                     " not divisible by 2^depth = " + std::to_string(div));
  std::vector<Tensor> skips;
  Tensor h = x;
  for (const auto& b : down_) {
    h = run_block(b, h, training);
    skips.push_back(h);
    h = nn::max_pool2(h);
  }
  h = run_block(bottom_, h, training);
  if (training && spec_.dropout_rate > 0.0) {
    if (!dropout_rng) throw Error("unet: training with dropout needs an rng");
    h = nn::dropout(h, static_cast<float>(spec_.dropout_rate), *dropout_rng, true);
  }
  for (std::size_t i = 0; i < up_.size(); ++i) {
    h = nn::leaky_relu(up_conv_[i](nn::upsample_nearest2(h)), static_cast<float>(spec_.leaky_slope));
    h = nn::concat_channels(h, skips[skips.size() - 1 - i]);
    h = run_block(up_[i], h, training);
  }
  return head_(h);
}

void UNet::symmetrize_kernels() {
  for (auto [name, t] : store_.params()) {
    const Shape s = t.shape();
    if (s.h < 2 || s.w < 2) continue;
    auto v = t.data();
    for (int oc = 0; oc < s.n * s.c; ++oc)
      for (int i = 0; i < s.h; ++i)
        for (int j = 0; j < s.w / 2; ++j) {
          float& a = v[static_cast<std::size_t>(oc) * s.plane() + i * s.w + j];
          float& b = v[static_cast<std::size_t>(oc) * s.plane() + i * s.w + (s.w - 1 - j)];
          a = b = 0.5f * (a + b);
        }
  }
}

std::unique_ptr<UNet> build_unet(const UNetSpec& spec, std::uint64_t seed) {
  return std::make_unique<UNet>(spec, seed);
}

SpadeNorm::SpadeNorm(nn::ParamStore& store, const std::string& name, int channels, int label_channels, int hidden,
                     int kernel, NormKind pfn, Rng& rng)
    : channels_(channels), pfn_(store, name + ".pfn", pfn, channels) {
  shared_ = Conv2d(store, name + ".shared", label_channels, hidden, kernel, 1, rng, true);
  gamma_ = Conv2d(store, name + ".gamma", hidden, channels, kernel, 1, rng, true);
  beta_ = Conv2d(store, name + ".beta", hidden, channels, kernel, 1, rng, true);
  // Start near identity modulation.
  for (auto* c : {&gamma_, &beta_})
    for (float& w : c->weight.data()) w *= 0.1f;
}

Tensor SpadeNorm::forward(const Tensor& x, const Tensor& onehot, bool training) const {
  if (x.shape().c != channels_)
    throw ShapeError("spade: features have " + std::to_string(x.shape().c) + " channels, layer expects " +
                     std::to_string(channels_));
  if (onehot.shape().n != x.shape().n) throw ShapeError("spade: batch size mismatch");
  const Tensor m = nn::resize_nearest(onehot, x.shape().h, x.shape().w);
  const Tensor normed = pfn_(x, training);
  const Tensor actv = nn::relu(shared_(m));
  return nn::modulate(normed, gamma_(actv), beta_(actv));
}

void SpadeNorm::zero_init_heads() {
  gamma_.zero_init();
  beta_.zero_init();
}

Tensor spade_modulate(const SpadeNorm& layer, const Tensor& features, const Tensor& onehot, bool training) {
  return layer.forward(features, onehot, training);
}

int SpadeGenerator::channels_at(int stage) const {
  const int k = spec_.num_upsampling_stages;
  return spec_.base_channels * std::min(spec_.max_channel_mult, 1 << (k - stage));
}

SpadeGenerator::ResBlock SpadeGenerator::make_block(const std::string& name, int cin, int cout, Rng& rng) {
  ResBlock b;
  const int mid = std::min(cin, cout);
  const auto pfn = spec_.param_free_norm;
  const int k = spec_.spade_kernel, hid = spec_.spade_hidden, lc = spec_.label_channels;
  b.n0 = SpadeNorm(store_, name + ".norm0", cin, lc, hid, k, pfn, rng);
  b.c0 = Conv2d(store_, name + ".conv0", cin, mid, 3, 1, rng, true);
  b.n1 = SpadeNorm(store_, name + ".norm1", mid, lc, hid, k, pfn, rng);
  b.c1 = Conv2d(store_, name + ".conv1", mid, cout, 3, 1, rng, true);
  b.learned_shortcut = cin != cout;
  if (b.learned_shortcut) {
    b.ns = SpadeNorm(store_, name + ".norms", cin, lc, hid, k, pfn, rng);
    b.cs = Conv2d(store_, name + ".convs", cin, cout, 1, 1, rng, false);
  }
  return b;
}

SpadeGenerator::SpadeGenerator(const SpadeGenSpec& spec, int input_size, std::uint64_t seed)
    : spec_(spec), input_size_(input_size) {
  spec_.validate();
  const int div = 1 << spec_.num_upsampling_stages;
  if (input_size < div || input_size % div) throw ConfigError("generator: input size must be divisible by 2^stages");
  const int base = input_size / div;
  Rng rng(derive_seed(seed, 0x47454eULL));
  const int c0 = channels_at(0);
  fc_ = nn::Linear(store_, "fc", spec_.z_dim, c0 * base * base, rng);
  blocks_.push_back(make_block("head", c0, c0, rng));
  for (int i = 1; i <= spec_.num_upsampling_stages; ++i)
    blocks_.push_back(make_block("up" + std::to_string(i), channels_at(i - 1), channels_at(i), rng));
  out_ = Conv2d(store_, "out", channels_at(spec_.num_upsampling_stages), 1, 3, 1, rng, true);
}

Tensor SpadeGenerator::run_block(const ResBlock& b, const Tensor& x, const Tensor& onehot, bool training) const {
  const Tensor xs = b.learned_shortcut ? b.cs(b.ns.forward(x, onehot, training)) : x;
  Tensor dx = b.c0(nn::leaky_relu(b.n0.forward(x, onehot, training), kGanSlope));
  dx = b.c1(nn::leaky_relu(b.n1.forward(dx, onehot, training), kGanSlope));
  return nn::add(xs, dx);
}

Tensor SpadeGenerator::forward(const Tensor& onehot, const Tensor& z, bool training) {
  const Shape s = onehot.shape();
  if (s.c != spec_.label_channels)
    throw ShapeError("generator: label map has " + std::to_string(s.c) + " channels, expected " +
                     std::to_string(spec_.label_channels));
  if (z.shape().n != s.n || static_cast<int>(z.shape().sample()) != spec_.z_dim)
    throw ShapeError("generator: z must be (B, " + std::to_string(spec_.z_dim) + ")");
  if (s.h != input_size_ || s.w != input_size_)
    throw ShapeError("generator: label map must be " + std::to_string(input_size_) + "x" + std::to_string(input_size_));
  const int sh = s.h >> spec_.num_upsampling_stages, sw = s.w >> spec_.num_upsampling_stages;
  const int c0 = channels_at(0);
  Tensor h = nn::reshape(fc_(z), Shape{s.n, c0, sh, sw});
  h = run_block(blocks_[0], h, onehot, training);
  for (std::size_t i = 1; i < blocks_.size(); ++i)
    h = run_block(blocks_[i], nn::upsample_nearest2(h), onehot, training);
  return nn::tanh(out_(nn::leaky_relu(h, kGanSlope)));
}

Tensor generator_forward(SpadeGenerator& g, const Tensor& onehot, const Tensor& z, bool training) {
  return g.forward(onehot, z, training);
}

StyleEncoder::StyleEncoder(const StyleEncoderSpec& spec, int input_size, std::uint64_t seed)
    : spec_(spec), input_size_(input_size) {
  if (spec_.num_downsampling < 1 || input_size % (1 << spec_.num_downsampling))
    throw ConfigError("style encoder: input size must be divisible by 2^num_downsampling");
  Rng rng(derive_seed(seed, 0x454e43ULL));
  int c = 1;
  for (int i = 0; i < spec_.num_downsampling; ++i) {
    const int w = spec_.base_channels * std::min(1 << i, 8);
    convs_.push_back(Conv2d(store_, "conv" + std::to_string(i), c, w, 3, 2, rng, true));
    c = w;
  }
  const int side = input_size >> spec_.num_downsampling;
  mu_ = nn::Linear(store_, "fc_mu", c * side * side, spec_.z_dim, rng);
  logvar_ = nn::Linear(store_, "fc_logvar", c * side * side, spec_.z_dim, rng);
  for (float& w : logvar_.weight.data()) w *= 0.1f;
}

StyleCode StyleEncoder::encode(const Tensor& image, Rng* rng, bool deterministic) {
  const Shape s = image.shape();
  if (s.c != 1 || s.h != input_size_ || s.w != input_size_)
    throw ShapeError("style encoder: expected (B,1," + std::to_string(input_size_) + "," + std::to_string(input_size_) +
                     "), got " + s.str());
  Tensor h = image;
  for (const auto& c : convs_) h = nn::leaky_relu(c(h), kGanSlope);
  StyleCode code;
  code.mu = mu_(h);
  code.logvar = logvar_(h);
  if (deterministic) {
    code.z = code.mu;
    return code;
  }
  if (!rng) throw Error("style encoder: sampling needs an rng");
  std::vector<float> eps(code.mu.numel());
  for (auto& e : eps) e = static_cast<float>(rng->normal());
  const Tensor noise = Tensor::from(code.mu.shape(), std::move(eps));
  code.z = nn::add(code.mu, nn::mul(nn::exp(nn::scale(code.logvar, 0.5f)), noise));
  return code;
}

StyleCode style_encode(StyleEncoder& e, const Tensor& image, Rng* rng, bool deterministic) {
  return e.encode(image, rng, deterministic);
}

Discriminator::Discriminator(const DiscriminatorSpec& spec, std::uint64_t seed) : spec_(spec) {
  if (spec_.num_scales < 1) throw ConfigError("discriminator: scale count must be >= 1");
  if (spec_.num_layers < 1) throw ConfigError("discriminator: layer count must be >= 1");
  Rng rng(derive_seed(seed, 0x444953ULL));
  for (int s = 0; s < spec_.num_scales; ++s) {
    Scale sc;
    int c = spec_.input_channels;
    for (int l = 0; l < spec_.num_layers; ++l) {
      const int w = spec_.base_channels * std::min(1 << l, 8);
      sc.convs.push_back(
          Conv2d(store_, "scale" + std::to_string(s) + ".conv" + std::to_string(l), c, w, 3, 2, rng, true));
      c = w;
    }
    sc.logit = Conv2d(store_, "scale" + std::to_string(s) + ".logit", c, 1, 3, 1, rng, true);
    scales_.push_back(std::move(sc));
  }
}

DiscOutput Discriminator::forward(const Tensor& image, const Tensor& onehot) {
  if (image.shape().c + onehot.shape().c != spec_.input_channels)
    throw ShapeError("discriminator: expected " + std::to_string(spec_.input_channels) + " input channels");
  DiscOutput out;
  Tensor x = nn::concat_channels(image, onehot);
  for (std::size_t s = 0; s < scales_.size(); ++s) {
    if (s > 0) x = nn::avg_pool2(x);
    std::vector<Tensor> feats;
    Tensor h = x;
    for (std::size_t l = 0; l < scales_[s].convs.size(); ++l) {
      h = scales_[s].convs[l](h);
      if (l > 0 && spec_.norm_kind == NormKind::instance) h = nn::instance_norm(h);
      h = nn::leaky_relu(h, kGanSlope);
      feats.push_back(h);
    }
    out.logits.push_back(scales_[s].logit(h));
    out.features.push_back(std::move(feats));
  }
  return out;
}

DiscOutput discriminator_forward(Discriminator& d, const Tensor& image, const Tensor& onehot) {
  return d.forward(image, onehot);
}

}  // namespace cardiosynth::nets
