#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cardiosynth/core/config.hpp"
#include "cardiosynth/core/rng.hpp"
#include "cardiosynth/nn/ops.hpp"

namespace cardiosynth::nn {

/// Named trainable tensors and normalization statistics of one network.
class ParamStore {
 public:
  Tensor add(const std::string& name, Shape s, std::vector<float> init);
  BatchStats* add_stats(const std::string& name, int channels);

  const std::vector<std::pair<std::string, Tensor>>& params() const { return params_; }
  std::vector<Tensor> tensors() const;
  std::size_t count() const;
  void zero_grad();

  /// "CSPB" blob: every parameter and statistics buffer, by name.
  std::vector<std::uint8_t> serialize() const;
  /// Names, order and shapes must match the store; throws FormatError otherwise.
  void load(std::span<const std::uint8_t> blob);

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  std::vector<std::pair<std::string, std::unique_ptr<BatchStats>>> stats_;
};

std::vector<float> he_normal(std::size_t n, int fan_in, Rng& rng);

struct Conv2d {
  Tensor weight;
  Tensor bias;
  int kernel = 3;
  int stride = 1;
  int pad = 1;

  Conv2d() = default;
  Conv2d(ParamStore& store, const std::string& name, int cin, int cout, int kernel, int stride, Rng& rng,
         bool with_bias = true);
  Tensor operator()(const Tensor& x) const { return conv2d(x, weight, bias, stride, pad); }
  void zero_init();
  int in_channels() const { return weight.shape().c; }
  int out_channels() const { return weight.shape().n; }
};

struct Linear {
  Tensor weight;
  Tensor bias;

  Linear() = default;
  Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng);
  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
};

/// Parameter-free normalization of the configured kind.
struct Norm {
  NormKind kind = NormKind::none;
  BatchStats* stats = nullptr;

  Norm() = default;
  Norm(ParamStore& store, const std::string& name, NormKind kind, int channels);
  Tensor operator()(const Tensor& x, bool training) const;
};

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions opts);
  void step();
  void zero_grad();
  void set_lr(double lr) { opts_.lr = lr; }
  double lr() const { return opts_.lr; }
  long steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  AdamOptions opts_;
  long t_ = 0;
};

}  // namespace cardiosynth::nn
