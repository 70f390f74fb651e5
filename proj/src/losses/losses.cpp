#include "cardiosynth/losses/losses.hpp"

#include <algorithm>
#include <cmath>

#include "cardiosynth/core/error.hpp"
#include "cardiosynth/nn/ops.hpp"

namespace cardiosynth::losses {

template <class T>
CeDiceEval<T> ce_dice(std::span<const T> logits, std::span<const std::uint8_t> target, int batch, int classes,
                      bool want_grad) {
  if (classes < 2) throw ShapeError("ce_dice: need at least 2 classes");
  if (batch < 1 || target.size() % static_cast<std::size_t>(batch)) throw ShapeError("ce_dice: bad batch size");
  const std::size_t hw = target.size() / static_cast<std::size_t>(batch);
  const std::size_t C = static_cast<std::size_t>(classes);
  if (logits.size() != hw * C * static_cast<std::size_t>(batch))
    throw ShapeError("ce_dice: logits and target sizes disagree");
  for (auto t : target)
    if (t >= classes)
      throw ValueError("ce_dice: label id " + std::to_string(t) + " out of range for " + std::to_string(classes) +
                       " classes");

  const std::size_t n = target.size();
  std::vector<T> p(logits.size());
  T ce = 0;
  std::vector<T> inter(C, T(0)), psum(C, T(0)), gsum(C, T(0));
  for (int b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < hw; ++i) {
      const std::size_t base = static_cast<std::size_t>(b) * C * hw + i;
      T m = logits[base];
      for (std::size_t c = 1; c < C; ++c) m = std::max(m, logits[base + c * hw]);
      T z = 0;
      for (std::size_t c = 0; c < C; ++c) z += std::exp(logits[base + c * hw] - m);
      const T lz = std::log(z) + m;
      const std::uint8_t g = target[static_cast<std::size_t>(b) * hw + i];
      ce += lz - logits[base + g * hw];
      for (std::size_t c = 0; c < C; ++c) {
        const T pc = std::exp(logits[base + c * hw] - lz);
        p[base + c * hw] = pc;
        psum[c] += pc;
        if (c == g) inter[c] += pc;
      }
      gsum[g] += 1;
    }
  ce /= static_cast<T>(n);
  const T eps = static_cast<T>(kDiceEps);
  const T nf = static_cast<T>(C - 1);
  T dice = 0;
  for (std::size_t c = 1; c < C; ++c) dice += (2 * inter[c] + eps) / (psum[c] + gsum[c] + eps);
  CeDiceEval<T> r;
  r.ce = ce;
  r.dice_loss = 1 - dice / nf;
  r.total = r.ce + r.dice_loss;
  if (!want_grad) return r;

  r.grad.assign(logits.size(), T(0));
  std::vector<T> a(C);
  for (int b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < hw; ++i) {
      const std::size_t base = static_cast<std::size_t>(b) * C * hw + i;
      const std::uint8_t g = target[static_cast<std::size_t>(b) * hw + i];
      // a_c = dDiceLoss/dp_c
      T pa = 0;
      a[0] = 0;
      for (std::size_t c = 1; c < C; ++c) {
        const T den = psum[c] + gsum[c] + eps;
        const T gi = c == g ? T(1) : T(0);
        a[c] = -(2 * gi * den - (2 * inter[c] + eps)) / (den * den) / nf;
      }
      for (std::size_t c = 0; c < C; ++c) pa += p[base + c * hw] * a[c];
      for (std::size_t c = 0; c < C; ++c) {
        const T pc = p[base + c * hw];
        const T dce = (pc - (c == g ? T(1) : T(0))) / static_cast<T>(n);
        r.grad[base + c * hw] = dce + pc * (a[c] - pa);
      }
    }
  return r;
}

template <class T>
Evaluated<T> kl_divergence(std::span<const T> mu, std::span<const T> logvar, bool want_grad) {
  if (mu.size() != logvar.size()) throw ShapeError("kl_divergence: mu and logvar lengths differ");
  Evaluated<T> r;
  T s = 0;
  for (std::size_t i = 0; i < mu.size(); ++i) s += 1 + logvar[i] - mu[i] * mu[i] - std::exp(logvar[i]);
  r.value = T(-0.5) * s;
  if (want_grad) {
    r.grad.resize(2 * mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
      r.grad[i] = mu[i];
      r.grad[mu.size() + i] = T(0.5) * (std::exp(logvar[i]) - 1);
    }
  }
  return r;
}

namespace {

template <class T>
std::size_t total_size(const std::vector<std::span<const T>>& v) {
  std::size_t n = 0;
  for (const auto& s : v) n += s.size();
  return n;
}

template <class T>
void check_scales(const std::vector<std::span<const T>>& v, const char* what) {
  if (v.empty()) throw ShapeError(std::string(what) + ": no scales");
  for (const auto& s : v)
    if (s.empty()) throw ShapeError(std::string(what) + ": empty logit map");
}

}  // namespace

template <class T>
Evaluated<T> hinge_d(const std::vector<std::span<const T>>& real, const std::vector<std::span<const T>>& fake,
                     bool want_grad) {
  check_scales(real, "hinge_d");
  check_scales(fake, "hinge_d");
  if (real.size() != fake.size()) throw ShapeError("hinge_d: scale counts differ");
  Evaluated<T> r;
  const T ns = static_cast<T>(real.size());
  if (want_grad) r.grad.assign(total_size(real) + total_size(fake), T(0));
  std::size_t off = 0;
  for (std::size_t s = 0; s < real.size(); ++s) {
    T acc = 0;
    const T w = T(1) / (static_cast<T>(real[s].size()) * ns);
    for (std::size_t i = 0; i < real[s].size(); ++i) {
      const T m = 1 - real[s][i];
      if (m > 0) {
        acc += m;
        if (want_grad) r.grad[off + i] = -w;
      }
    }
    r.value += acc * w;
    off += real[s].size();
  }
  for (std::size_t s = 0; s < fake.size(); ++s) {
    T acc = 0;
    const T w = T(1) / (static_cast<T>(fake[s].size()) * ns);
    for (std::size_t i = 0; i < fake[s].size(); ++i) {
      const T m = 1 + fake[s][i];
      if (m > 0) {
        acc += m;
        if (want_grad) r.grad[off + i] = w;
      }
    }
    r.value += acc * w;
    off += fake[s].size();
  }
  return r;
}

template <class T>
Evaluated<T> hinge_g(const std::vector<std::span<const T>>& fake, bool want_grad) {
  check_scales(fake, "hinge_g");
  Evaluated<T> r;
  const T ns = static_cast<T>(fake.size());
  for (const auto& f : fake) {
    T acc = 0;
    for (T v : f) acc += v;
    const T w = T(1) / (static_cast<T>(f.size()) * ns);
    r.value -= acc * w;
    if (want_grad) r.grad.insert(r.grad.end(), f.size(), -w);
  }
  return r;
}

template <class T>
Evaluated<T> feature_matching(const std::vector<std::span<const T>>& real, const std::vector<std::span<const T>>& fake,
                              T weight, bool want_grad) {
  if (real.size() != fake.size()) throw ShapeError("feature_matching: layer counts differ");
  if (real.empty()) throw ShapeError("feature_matching: no features");
  Evaluated<T> r;
  const T nl = static_cast<T>(real.size());
  for (std::size_t l = 0; l < real.size(); ++l) {
    if (real[l].size() != fake[l].size() || real[l].empty())
      throw ShapeError("feature_matching: feature " + std::to_string(l) + " shapes differ");
    const T w = weight / (static_cast<T>(real[l].size()) * nl);
    T acc = 0;
    for (std::size_t i = 0; i < real[l].size(); ++i) {
      const T d = fake[l][i] - real[l][i];
      acc += std::abs(d);
      if (want_grad) r.grad.push_back(d > 0 ? w : (d < 0 ? -w : T(0)));
    }
    r.value += acc * w;
  }
  return r;
}

#define CARDIOSYNTH_LOSSES(T)                                                                                        \
  template CeDiceEval<T> ce_dice<T>(std::span<const T>, std::span<const std::uint8_t>, int, int, bool);           \
  template Evaluated<T> kl_divergence<T>(std::span<const T>, std::span<const T>, bool);                            \
  template Evaluated<T> hinge_d<T>(const std::vector<std::span<const T>>&, const std::vector<std::span<const T>>&, \
                                   bool);                                                                          \
  template Evaluated<T> hinge_g<T>(const std::vector<std::span<const T>>&, bool);                                  \
  template Evaluated<T> feature_matching<T>(const std::vector<std::span<const T>>&,                                \
                                            const std::vector<std::span<const T>>&, T, bool);
CARDIOSYNTH_LOSSES(float)
CARDIOSYNTH_LOSSES(double)
#undef CARDIOSYNTH_LOSSES

namespace {

std::vector<double> widen(const nn::Tensor& t) { return {t.data().begin(), t.data().end()}; }

std::vector<float> narrow(std::span<const double> g) { return {g.begin(), g.end()}; }

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw ValueError(std::string(what) + ": non-finite value");
}

}  // namespace

SegLoss ce_dice(const nn::Tensor& logits, std::span<const std::uint8_t> target) {
  const auto s = logits.shape();
  if (target.size() != static_cast<std::size_t>(s.n) * s.plane())
    throw ShapeError("ce_dice: target has " + std::to_string(target.size()) + " labels, logits " + s.str());
  const auto x = widen(logits);
  auto e = ce_dice<double>(x, target, s.n, s.c, logits.requires_grad());
  SegLoss out;
  out.ce = e.ce;
  out.dice_loss = e.dice_loss;
  if (logits.requires_grad())
    out.total = nn::external_scalar(static_cast<float>(e.total), {logits}, {narrow(e.grad)});
  else
    out.total = nn::external_scalar(static_cast<float>(e.total), {}, {});
  return out;
}

nn::Tensor kl_divergence(const nn::Tensor& mu, const nn::Tensor& logvar) {
  const auto m = widen(mu), lv = widen(logvar);
  auto e = kl_divergence<double>(m, lv, true);
  check_finite(e.value, "kl_divergence");
  std::vector<float> gm(e.grad.begin(), e.grad.begin() + static_cast<std::ptrdiff_t>(m.size()));
  std::vector<float> gl(e.grad.begin() + static_cast<std::ptrdiff_t>(m.size()), e.grad.end());
  return nn::external_scalar(static_cast<float>(e.value), {mu, logvar}, {std::move(gm), std::move(gl)});
}

namespace {

nn::Tensor attach(double value, const std::vector<nn::Tensor>& inputs, std::span<const double> grad) {
  std::vector<std::vector<float>> grads;
  std::size_t off = 0;
  for (const auto& t : inputs) {
    grads.emplace_back(grad.begin() + static_cast<std::ptrdiff_t>(off),
                       grad.begin() + static_cast<std::ptrdiff_t>(off + t.numel()));
    off += t.numel();
  }
  return nn::external_scalar(static_cast<float>(value), inputs, std::move(grads));
}

}  // namespace

nn::Tensor hinge_d(const std::vector<nn::Tensor>& real_logits, const std::vector<nn::Tensor>& fake_logits) {
  std::vector<std::vector<double>> store;
  std::vector<std::span<const double>> r, f;
  for (const auto& t : real_logits) store.push_back(widen(t));
  for (const auto& t : fake_logits) store.push_back(widen(t));
  for (std::size_t i = 0; i < real_logits.size(); ++i) r.emplace_back(store[i]);
  for (std::size_t i = 0; i < fake_logits.size(); ++i) f.emplace_back(store[real_logits.size() + i]);
  auto e = hinge_d<double>(r, f, true);
  std::vector<nn::Tensor> inputs(real_logits);
  inputs.insert(inputs.end(), fake_logits.begin(), fake_logits.end());
  return attach(e.value, inputs, e.grad);
}

nn::Tensor hinge_g(const std::vector<nn::Tensor>& fake_logits) {
  std::vector<std::vector<double>> store;
  std::vector<std::span<const double>> f;
  for (const auto& t : fake_logits) store.push_back(widen(t));
  for (const auto& s : store) f.emplace_back(s);
  auto e = hinge_g<double>(f, true);
  return attach(e.value, fake_logits, e.grad);
}

nn::Tensor feature_matching(const std::vector<std::vector<nn::Tensor>>& real_feats,
                            const std::vector<std::vector<nn::Tensor>>& fake_feats, double weight) {
  if (real_feats.size() != fake_feats.size()) throw ShapeError("feature_matching: scale counts differ");
  std::vector<nn::Tensor> fakes;
  std::vector<std::vector<double>> rs, fs;
  for (std::size_t s = 0; s < real_feats.size(); ++s) {
    if (real_feats[s].size() != fake_feats[s].size()) throw ShapeError("feature_matching: layer counts differ");
    for (std::size_t l = 0; l < real_feats[s].size(); ++l) {
      if (!(real_feats[s][l].shape() == fake_feats[s][l].shape()))
        throw ShapeError("feature_matching: shapes differ at scale " + std::to_string(s) + " layer " +
                         std::to_string(l));
      rs.push_back(widen(real_feats[s][l]));
      fs.push_back(widen(fake_feats[s][l]));
      fakes.push_back(fake_feats[s][l]);
    }
  }
  std::vector<std::span<const double>> r(rs.begin(), rs.end()), f(fs.begin(), fs.end());
  auto e = feature_matching<double>(r, f, weight, true);
  return attach(e.value, fakes, e.grad);
}

}  // namespace cardiosynth::losses
