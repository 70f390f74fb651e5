#pragma once

#include <span>
#include <vector>

#include "cardiosynth/core/rng.hpp"
#include "cardiosynth/nn/tensor.hpp"

namespace cardiosynth::nn {

/// Running per-channel statistics of a batch normalization.
struct BatchStats {
  std::vector<float> mean;
  std::vector<float> var;
  explicit BatchStats(int channels = 0) : mean(static_cast<std::size_t>(channels), 0.0f),
                                          var(static_cast<std::size_t>(channels), 1.0f) {}
};

inline constexpr float kNormEps = 1e-5f;
inline constexpr float kBatchMomentum = 0.1f;

/// x (N,Cin,H,W), w (Cout,Cin,k,k), optional bias (1,Cout,1,1).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad);
/// x (N,F,1,1) or any (N,...) flattened per sample; w (Out,F,1,1); bias (1,Out,1,1).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

Tensor leaky_relu(const Tensor& x, float slope);
inline Tensor relu(const Tensor& x) { return leaky_relu(x, 0.0f); }
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
/// x * (1 + gamma) + beta, all the same shape.
Tensor modulate(const Tensor& x, const Tensor& gamma, const Tensor& beta);

/// Parameter-free per-channel normalization over (N,H,W). In training mode
/// batch statistics are used and `running` is updated; otherwise `running`
/// is applied. `running` may be null in training mode.
Tensor batch_norm(const Tensor& x, BatchStats* running, bool training, float momentum = kBatchMomentum,
                  float eps = kNormEps);
/// Parameter-free per-(sample, channel) normalization over (H,W).
Tensor instance_norm(const Tensor& x, float eps = kNormEps);
/// y = x * gamma_c + beta_c with gamma, beta of shape (1,C,1,1).
Tensor channel_affine(const Tensor& x, const Tensor& gamma, const Tensor& beta);

/// Inverted dropout; identity when !training or p == 0.
Tensor dropout(const Tensor& x, float p, Rng& rng, bool training);

Tensor max_pool2(const Tensor& x);
Tensor avg_pool2(const Tensor& x);
Tensor upsample_nearest2(const Tensor& x);
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor reshape(const Tensor& x, Shape s);

/// Nearest-neighbour resize to (h, w); no gradient (used for label masks).
Tensor resize_nearest(const Tensor& x, int h, int w);

/// Scalar node with value `value` whose gradient w.r.t. inputs[i] is grads[i]
/// (scaled by the upstream gradient). Used to attach losses computed outside
/// the graph.
Tensor external_scalar(float value, std::vector<Tensor> inputs, std::vector<std::vector<float>> grads);

/// Sum of scalar tensors.
Tensor sum_scalars(const std::vector<Tensor>& terms);

}  // namespace cardiosynth::nn
