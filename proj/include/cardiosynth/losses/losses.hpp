#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cardiosynth/nn/tensor.hpp"

namespace cardiosynth::losses {

inline constexpr double kDiceEps = 1e-5;
inline constexpr double kFeatureMatchingWeight = 10.0;

template <class T>
struct Evaluated {
  T value{};
  std::vector<T> grad;  // empty unless requested
};

template <class T>
struct CeDiceEval {
  T total{};
  T ce{};
  T dice_loss{};  // 1 - mean foreground soft Dice
  std::vector<T> grad;
};

/// logits laid out (B, C, HW); target (B, HW) with ids < C.
template <class T>
CeDiceEval<T> ce_dice(std::span<const T> logits, std::span<const std::uint8_t> target, int batch, int classes,
                      bool want_grad);

/// Gradient layout: [d/dmu..., d/dlogvar...].
template <class T>
Evaluated<T> kl_divergence(std::span<const T> mu, std::span<const T> logvar, bool want_grad);

/// One span per scale. Gradient layout: all real then all fake values, scale-major.
template <class T>
Evaluated<T> hinge_d(const std::vector<std::span<const T>>& real, const std::vector<std::span<const T>>& fake,
                     bool want_grad);
template <class T>
Evaluated<T> hinge_g(const std::vector<std::span<const T>>& fake, bool want_grad);

/// One span per (scale, layer) pair; gradient w.r.t. the fake side only.
template <class T>
Evaluated<T> feature_matching(const std::vector<std::span<const T>>& real, const std::vector<std::span<const T>>& fake,
                              T weight, bool want_grad);

struct SegLoss {
  nn::Tensor total;
  double ce = 0.0;
  double dice_loss = 0.0;
};

SegLoss ce_dice(const nn::Tensor& logits, std::span<const std::uint8_t> target);
nn::Tensor kl_divergence(const nn::Tensor& mu, const nn::Tensor& logvar);
nn::Tensor hinge_d(const std::vector<nn::Tensor>& real_logits, const std::vector<nn::Tensor>& fake_logits);
nn::Tensor hinge_g(const std::vector<nn::Tensor>& fake_logits);
/// feats[scale][layer]; the real side is treated as a constant.
nn::Tensor feature_matching(const std::vector<std::vector<nn::Tensor>>& real_feats,
                            const std::vector<std::vector<nn::Tensor>>& fake_feats,
                            double weight = kFeatureMatchingWeight);

}  // namespace cardiosynth::losses
