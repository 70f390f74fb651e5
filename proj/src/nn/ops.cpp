#include "cardiosynth/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "cardiosynth/core/error.hpp"
#include "cardiosynth/kernels/kernels.hpp"

namespace cardiosynth::nn {

using detail::make_result;
using detail::Node;

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.shape() == b.shape()))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
}

void im2col(const float* x, int c, int h, int w, int k, int stride, int pad, int ho, int wo, float* col) {
  const std::size_t p = static_cast<std::size_t>(ho) * wo;
  for (int ci = 0; ci < c; ++ci) {
    const float* xc = x + static_cast<std::size_t>(ci) * h * w;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        float* row = col + (static_cast<std::size_t>(ci * k + ki) * k + kj) * p;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * stride - pad + ki;
          float* out = row + static_cast<std::size_t>(oh) * wo;
          if (ih < 0 || ih >= h) {
            std::fill(out, out + wo, 0.0f);
            continue;
          }
          const float* xr = xc + static_cast<std::size_t>(ih) * w;
          if (stride == 1) {
            const int lo = std::min(wo, std::max(0, pad - kj));
            const int hi = std::min(wo, w + pad - kj);
            std::fill(out, out + lo, 0.0f);
            if (hi > lo) std::memcpy(out + lo, xr + lo - pad + kj, static_cast<std::size_t>(hi - lo) * sizeof(float));
            if (hi < wo) std::fill(out + std::max(hi, lo), out + wo, 0.0f);
          } else {
            for (int ow = 0; ow < wo; ++ow) {
              const int iw = ow * stride - pad + kj;
              out[ow] = (iw >= 0 && iw < w) ? xr[iw] : 0.0f;
            }
          }
        }
      }
    }
  }
}

void col2im(const float* col, int c, int h, int w, int k, int stride, int pad, int ho, int wo, float* dx) {
  const std::size_t p = static_cast<std::size_t>(ho) * wo;
  for (int ci = 0; ci < c; ++ci) {
    float* dxc = dx + static_cast<std::size_t>(ci) * h * w;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const float* row = col + (static_cast<std::size_t>(ci * k + ki) * k + kj) * p;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= h) continue;
          float* dr = dxc + static_cast<std::size_t>(ih) * w;
          const float* in = row + static_cast<std::size_t>(oh) * wo;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * stride - pad + kj;
            if (iw >= 0 && iw < w) dr[iw] += in[ow];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad) {
  const Shape xs = x.shape(), ws = w.shape();
  if (ws.c != xs.c) throw ShapeError("conv2d: input has " + std::to_string(xs.c) + " channels, weight expects " +
                                     std::to_string(ws.c));
  if (ws.h != ws.w) throw ShapeError("conv2d: square kernels only");
  const int k = ws.h, cout = ws.n;
  const int ho = (xs.h + 2 * pad - k) / stride + 1;
  const int wo = (xs.w + 2 * pad - k) / stride + 1;
  if (ho < 1 || wo < 1) throw ShapeError("conv2d: input " + xs.str() + " too small for kernel");
  const Shape ys{xs.n, cout, ho, wo};
  const int kdim = xs.c * k * k;
  const int p = ho * wo;
  const bool direct = k == 1 && stride == 1 && pad == 0;
  const auto& kt = kernels::active();

  std::vector<float> y(ys.numel());
  std::vector<float> col(direct ? 0 : static_cast<std::size_t>(kdim) * p);
  for (int n = 0; n < xs.n; ++n) {
    const float* xn = x.ptr() + n * xs.sample();
    const float* src = xn;
    if (!direct) {
      im2col(xn, xs.c, xs.h, xs.w, k, stride, pad, ho, wo, col.data());
      src = col.data();
    }
    float* yn = y.data() + n * ys.sample();
    kt.gemm(false, false, cout, p, kdim, 1.0f, w.ptr(), kdim, src, p, 0.0f, yn, p);
    if (bias.defined()) {
      for (int co = 0; co < cout; ++co) {
        const float b = bias.ptr()[co];
        float* yc = yn + static_cast<std::size_t>(co) * p;
        for (int i = 0; i < p; ++i) yc[i] += b;
      }
    }
  }

  std::vector<Tensor> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(ys, std::move(y), std::move(inputs), [=](Node& self) {
    const auto& kt = kernels::active();
    Node& xn_node = *self.inputs[0];
    Node& w_node = *self.inputs[1];
    const float* dy = self.grad.data();
    std::vector<float> col(direct ? 0 : static_cast<std::size_t>(kdim) * p);
    std::vector<float> dcol(static_cast<std::size_t>(kdim) * p);
    float* dw = w_node.requires_grad ? w_node.grad_data() : nullptr;
    float* dx = xn_node.requires_grad ? xn_node.grad_data() : nullptr;
    for (int n = 0; n < xs.n; ++n) {
      const float* dyn = dy + n * ys.sample();
      if (dw) {
        const float* xsrc = xn_node.value.data() + n * xs.sample();
        if (!direct) {
          im2col(xsrc, xs.c, xs.h, xs.w, k, stride, pad, ho, wo, col.data());
          xsrc = col.data();
        }
        kt.gemm(false, true, cout, kdim, p, 1.0f, dyn, p, xsrc, p, 1.0f, dw, kdim);
      }
      if (dx) {
        float* dxn = dx + n * xs.sample();
        if (direct) {
          kt.gemm(true, false, kdim, p, cout, 1.0f, w_node.value.data(), kdim, dyn, p, 1.0f, dxn, p);
        } else {
          kt.gemm(true, false, kdim, p, cout, 1.0f, w_node.value.data(), kdim, dyn, p, 0.0f, dcol.data(), p);
          col2im(dcol.data(), xs.c, xs.h, xs.w, k, stride, pad, ho, wo, dxn);
        }
      }
    }
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
      float* db = self.inputs[2]->grad_data();
      for (int n = 0; n < xs.n; ++n)
        for (int co = 0; co < cout; ++co)
          db[co] += static_cast<float>(kt.sum(static_cast<std::size_t>(p), dy + n * ys.sample() + co * p));
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  const int n = x.shape().n;
  const int f = static_cast<int>(x.shape().sample());
  const int out = w.shape().n;
  if (static_cast<int>(w.shape().sample()) != f)
    throw ShapeError("linear: input features " + std::to_string(f) + " vs weight " + w.shape().str());
  const auto& kt = kernels::active();
  std::vector<float> y(static_cast<std::size_t>(n) * out);
  kt.gemm(false, true, n, out, f, 1.0f, x.ptr(), f, w.ptr(), f, 0.0f, y.data(), out);
  if (bias.defined())
    for (int i = 0; i < n; ++i)
      for (int o = 0; o < out; ++o) y[static_cast<std::size_t>(i) * out + o] += bias.ptr()[o];
  std::vector<Tensor> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(Shape{n, out, 1, 1}, std::move(y), std::move(inputs), [=](Node& self) {
    const auto& kt = kernels::active();
    const float* dy = self.grad.data();
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    if (xn.requires_grad) kt.gemm(false, false, n, f, out, 1.0f, dy, out, wn.value.data(), f, 1.0f, xn.grad_data(), f);
    if (wn.requires_grad) kt.gemm(true, false, out, f, n, 1.0f, dy, out, xn.value.data(), f, 1.0f, wn.grad_data(), f);
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
      float* db = self.inputs[2]->grad_data();
      for (int i = 0; i < n; ++i)
        for (int o = 0; o < out; ++o) db[o] += dy[static_cast<std::size_t>(i) * out + o];
    }
  });
}

Tensor leaky_relu(const Tensor& x, float slope) {
  std::vector<float> y(x.numel());
  kernels::active().leaky_relu(y.size(), slope, x.ptr(), y.data());
  return make_result(x.shape(), std::move(y), {x}, [slope](Node& self) {
    Node& in = *self.inputs[0];
    kernels::active().leaky_relu_grad(in.value.size(), slope, in.value.data(), self.grad.data(), in.grad_data());
  });
}

Tensor tanh(const Tensor& x) {
  std::vector<float> y(x.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(x.ptr()[i]);
  return make_result(x.shape(), std::move(y), {x}, [](Node& self) {
    float* dx = self.inputs[0]->grad_data();
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      const float t = self.value[i];
      dx[i] += self.grad[i] * (1.0f - t * t);
    }
  });
}

Tensor exp(const Tensor& x) {
  std::vector<float> y(x.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::exp(x.ptr()[i]);
  return make_result(x.shape(), std::move(y), {x}, [](Node& self) {
    float* dx = self.inputs[0]->grad_data();
    for (std::size_t i = 0; i < self.value.size(); ++i) dx[i] += self.grad[i] * self.value[i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<float> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.ptr()[i] + b.ptr()[i];
  return make_result(a.shape(), std::move(y), {a, b}, [](Node& self) {
    const auto& kt = kernels::active();
    for (auto& in : self.inputs)
      if (in->requires_grad) kt.axpy(self.grad.size(), 1.0f, self.grad.data(), in->grad_data());
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  std::vector<float> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.ptr()[i] * b.ptr()[i];
  return make_result(a.shape(), std::move(y), {a, b}, [](Node& self) {
    Node& an = *self.inputs[0];
    Node& bn = *self.inputs[1];
    if (an.requires_grad) {
      float* da = an.grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) da[i] += self.grad[i] * bn.value[i];
    }
    if (bn.requires_grad) {
      float* db = bn.grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) db[i] += self.grad[i] * an.value[i];
    }
  });
}

Tensor scale(const Tensor& a, float s) {
  std::vector<float> y(a.numel());
  kernels::active().scale_shift(y.size(), s, 0.0f, a.ptr(), y.data());
  return make_result(a.shape(), std::move(y), {a}, [s](Node& self) {
    kernels::active().axpy(self.grad.size(), s, self.grad.data(), self.inputs[0]->grad_data());
  });
}

Tensor modulate(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  require_same(x, gamma, "modulate");
  require_same(x, beta, "modulate");
  std::vector<float> y(x.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x.ptr()[i] * (1.0f + gamma.ptr()[i]) + beta.ptr()[i];
  return make_result(x.shape(), std::move(y), {x, gamma, beta}, [](Node& self) {
    Node& xn = *self.inputs[0];
    Node& gn = *self.inputs[1];
    Node& bn = *self.inputs[2];
    const std::size_t n = self.grad.size();
    const float* dy = self.grad.data();
    if (xn.requires_grad) {
      float* dx = xn.grad_data();
      for (std::size_t i = 0; i < n; ++i) dx[i] += dy[i] * (1.0f + gn.value[i]);
    }
    if (gn.requires_grad) {
      float* dg = gn.grad_data();
      for (std::size_t i = 0; i < n; ++i) dg[i] += dy[i] * xn.value[i];
    }
    if (bn.requires_grad) kernels::active().axpy(n, 1.0f, dy, bn.grad_data());
  });
}

namespace {

// Shared backward of the normalizations: groups are lists of contiguous
// blocks normalized together; y holds the normalized output.
struct NormGroups {
  int groups;
  int blocks_per_group;
  std::size_t block;
  // Offset of block b of group g.
  std::function<std::size_t(int g, int b)> offset;
};

void norm_backward(const NormGroups& ng, const std::vector<float>& invstd, const float* y, const float* dy,
                   float* dx, bool use_batch_stats) {
  const auto& kt = kernels::active();
  const double count = static_cast<double>(ng.block) * ng.blocks_per_group;
  for (int g = 0; g < ng.groups; ++g) {
    const float is = invstd[static_cast<std::size_t>(g)];
    if (!use_batch_stats) {
      for (int b = 0; b < ng.blocks_per_group; ++b) {
        const std::size_t off = ng.offset(g, b);
        kt.axpy(ng.block, is, dy + off, dx + off);
      }
      continue;
    }
    double sum_dy = 0.0, sum_dy_y = 0.0;
    for (int b = 0; b < ng.blocks_per_group; ++b) {
      const std::size_t off = ng.offset(g, b);
      sum_dy += kt.sum(ng.block, dy + off);
      sum_dy_y += kt.dot(ng.block, dy + off, y + off);
    }
    const float mean_dy = static_cast<float>(sum_dy / count);
    const float mean_dy_y = static_cast<float>(sum_dy_y / count);
    for (int b = 0; b < ng.blocks_per_group; ++b) {
      const std::size_t off = ng.offset(g, b);
      for (std::size_t i = 0; i < ng.block; ++i) dx[off + i] += is * (dy[off + i] - mean_dy - y[off + i] * mean_dy_y);
    }
  }
}

}  // namespace

Tensor batch_norm(const Tensor& x, BatchStats* running, bool training, float momentum, float eps) {
  const Shape s = x.shape();
  const auto& kt = kernels::active();
  if (running && running->mean.size() != static_cast<std::size_t>(s.c))
    throw ShapeError("batch_norm: running stats have wrong channel count");
  if (!training && !running) throw ShapeError("batch_norm: inference requires running statistics");
  const std::size_t plane = s.plane();
  const std::size_t sample = s.sample();
  NormGroups ng{s.c, s.n, plane, [plane, sample](int g, int b) { return b * sample + g * plane; }};
  std::vector<float> y(x.numel());
  std::vector<float> invstd(static_cast<std::size_t>(s.c));
  const double count = static_cast<double>(plane) * s.n;
  for (int c = 0; c < s.c; ++c) {
    double mean = 0.0, var = 0.0;
    if (training) {
      for (int n = 0; n < s.n; ++n) mean += kt.sum(plane, x.ptr() + ng.offset(c, n));
      mean /= count;
      for (int n = 0; n < s.n; ++n) var += kt.sum_sq_dev(plane, x.ptr() + ng.offset(c, n), mean);
      var /= count;
      if (running) {
        const double unbiased = count > 1 ? var * count / (count - 1) : var;
        running->mean[c] = static_cast<float>((1.0 - momentum) * running->mean[c] + momentum * mean);
        running->var[c] = static_cast<float>((1.0 - momentum) * running->var[c] + momentum * unbiased);
      }
    } else {
      mean = running->mean[c];
      var = running->var[c];
    }
    const float is = static_cast<float>(1.0 / std::sqrt(var + eps));
    invstd[c] = is;
    const float shift = static_cast<float>(-mean) * is;
    for (int n = 0; n < s.n; ++n) {
      const std::size_t off = ng.offset(c, n);
      kt.scale_shift(plane, is, shift, x.ptr() + off, y.data() + off);
    }
  }
  return make_result(s, std::move(y), {x}, [ng, invstd, training](Node& self) {
    norm_backward(ng, invstd, self.value.data(), self.grad.data(), self.inputs[0]->grad_data(), training);
  });
}

Tensor instance_norm(const Tensor& x, float eps) {
  const Shape s = x.shape();
  const auto& kt = kernels::active();
  const std::size_t plane = s.plane();
  NormGroups ng{s.n * s.c, 1, plane, [plane](int g, int) { return static_cast<std::size_t>(g) * plane; }};
  std::vector<float> y(x.numel());
  std::vector<float> invstd(static_cast<std::size_t>(s.n * s.c));
  for (int g = 0; g < s.n * s.c; ++g) {
    const float* xg = x.ptr() + ng.offset(g, 0);
    const double mean = kt.sum(plane, xg) / static_cast<double>(plane);
    const double var = kt.sum_sq_dev(plane, xg, mean) / static_cast<double>(plane);
    const float is = static_cast<float>(1.0 / std::sqrt(var + eps));
    invstd[g] = is;
    kt.scale_shift(plane, is, static_cast<float>(-mean) * is, xg, y.data() + ng.offset(g, 0));
  }
  return make_result(s, std::move(y), {x}, [ng, invstd](Node& self) {
    norm_backward(ng, invstd, self.value.data(), self.grad.data(), self.inputs[0]->grad_data(), true);
  });
}

Tensor channel_affine(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  const Shape s = x.shape();
  if (gamma.numel() != static_cast<std::size_t>(s.c) || beta.numel() != static_cast<std::size_t>(s.c))
    throw ShapeError("channel_affine: parameter size mismatch");
  const auto& kt = kernels::active();
  const std::size_t plane = s.plane();
  std::vector<float> y(x.numel());
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const std::size_t off = n * s.sample() + c * plane;
      kt.scale_shift(plane, gamma.ptr()[c], beta.ptr()[c], x.ptr() + off, y.data() + off);
    }
  return make_result(s, std::move(y), {x, gamma, beta}, [s](Node& self) {
    const auto& kt = kernels::active();
    Node& xn = *self.inputs[0];
    Node& gn = *self.inputs[1];
    Node& bn = *self.inputs[2];
    const std::size_t plane = s.plane();
    const float* dy = self.grad.data();
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        const std::size_t off = n * s.sample() + c * plane;
        if (xn.requires_grad) kt.axpy(plane, gn.value[c], dy + off, xn.grad_data() + off);
        if (gn.requires_grad) gn.grad_data()[c] += static_cast<float>(kt.dot(plane, dy + off, xn.value.data() + off));
        if (bn.requires_grad) bn.grad_data()[c] += static_cast<float>(kt.sum(plane, dy + off));
      }
  });
}

Tensor dropout(const Tensor& x, float p, Rng& rng, bool training) {
  if (!training || p <= 0.0f) return x;
  const float keep_scale = 1.0f / (1.0f - p);
  std::vector<float> mask(x.numel());
  std::vector<float> y(x.numel());
  for (std::size_t i = 0; i < y.size(); ++i) {
    mask[i] = rng.uniform() >= p ? keep_scale : 0.0f;
    y[i] = x.ptr()[i] * mask[i];
  }
  return make_result(x.shape(), std::move(y), {x}, [mask = std::move(mask)](Node& self) {
    float* dx = self.inputs[0]->grad_data();
    for (std::size_t i = 0; i < mask.size(); ++i) dx[i] += self.grad[i] * mask[i];
  });
}

Tensor max_pool2(const Tensor& x) {
  const Shape s = x.shape();
  if (s.h % 2 || s.w % 2) throw ShapeError("max_pool2: spatial size must be even, got " + s.str());
  const Shape ys{s.n, s.c, s.h / 2, s.w / 2};
  std::vector<float> y(ys.numel());
  std::vector<std::uint32_t> arg(ys.numel());
  const float* xp = x.ptr();
  std::size_t o = 0;
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    const std::size_t base = static_cast<std::size_t>(nc) * s.plane();
    for (int i = 0; i < ys.h; ++i)
      for (int j = 0; j < ys.w; ++j, ++o) {
        std::size_t best = base + static_cast<std::size_t>(2 * i) * s.w + 2 * j;
        for (std::size_t cand : {best + 1, best + s.w, best + s.w + 1})
          if (xp[cand] > xp[best]) best = cand;
        y[o] = xp[best];
        arg[o] = static_cast<std::uint32_t>(best);
      }
  }
  return make_result(ys, std::move(y), {x}, [arg = std::move(arg)](Node& self) {
    float* dx = self.inputs[0]->grad_data();
    for (std::size_t i = 0; i < arg.size(); ++i) dx[arg[i]] += self.grad[i];
  });
}

Tensor avg_pool2(const Tensor& x) {
  const Shape s = x.shape();
  if (s.h % 2 || s.w % 2) throw ShapeError("avg_pool2: spatial size must be even, got " + s.str());
  const Shape ys{s.n, s.c, s.h / 2, s.w / 2};
  std::vector<float> y(ys.numel());
  const float* xp = x.ptr();
  std::size_t o = 0;
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    const float* xb = xp + static_cast<std::size_t>(nc) * s.plane();
    for (int i = 0; i < ys.h; ++i)
      for (int j = 0; j < ys.w; ++j, ++o) {
        const float* q = xb + static_cast<std::size_t>(2 * i) * s.w + 2 * j;
        y[o] = 0.25f * (q[0] + q[1] + q[s.w] + q[s.w + 1]);
      }
  }
  return make_result(ys, std::move(y), {x}, [s, ys](Node& self) {
    float* dx = self.inputs[0]->grad_data();
    std::size_t o = 0;
    for (int nc = 0; nc < s.n * s.c; ++nc) {
      float* db = dx + static_cast<std::size_t>(nc) * s.plane();
      for (int i = 0; i < ys.h; ++i)
        for (int j = 0; j < ys.w; ++j, ++o) {
          const float g = 0.25f * self.grad[o];
          float* q = db + static_cast<std::size_t>(2 * i) * s.w + 2 * j;
          q[0] += g;
          q[1] += g;
          q[s.w] += g;
          q[s.w + 1] += g;
        }
    }
  });
}

Tensor upsample_nearest2(const Tensor& x) {
  const Shape s = x.shape();
  const Shape ys{s.n, s.c, s.h * 2, s.w * 2};
  std::vector<float> y(ys.numel());
  const float* xp = x.ptr();
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    const float* xb = xp + static_cast<std::size_t>(nc) * s.plane();
    float* yb = y.data() + static_cast<std::size_t>(nc) * ys.plane();
    for (int i = 0; i < ys.h; ++i)
      for (int j = 0; j < ys.w; ++j) yb[static_cast<std::size_t>(i) * ys.w + j] = xb[(i / 2) * s.w + j / 2];
  }
  return make_result(ys, std::move(y), {x}, [s, ys](Node& self) {
    float* dx = self.inputs[0]->grad_data();
    for (int nc = 0; nc < s.n * s.c; ++nc) {
      float* db = dx + static_cast<std::size_t>(nc) * s.plane();
      const float* gb = self.grad.data() + static_cast<std::size_t>(nc) * ys.plane();
      for (int i = 0; i < ys.h; ++i)
        for (int j = 0; j < ys.w; ++j) db[(i / 2) * s.w + j / 2] += gb[static_cast<std::size_t>(i) * ys.w + j];
    }
  });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w)
    throw ShapeError("concat_channels: " + sa.str() + " vs " + sb.str());
  const Shape ys{sa.n, sa.c + sb.c, sa.h, sa.w};
  std::vector<float> y(ys.numel());
  for (int n = 0; n < sa.n; ++n) {
    std::copy_n(a.ptr() + n * sa.sample(), sa.sample(), y.data() + n * ys.sample());
    std::copy_n(b.ptr() + n * sb.sample(), sb.sample(), y.data() + n * ys.sample() + sa.sample());
  }
  return make_result(ys, std::move(y), {a, b}, [sa, sb, ys](Node& self) {
    const auto& kt = kernels::active();
    Node& an = *self.inputs[0];
    Node& bn = *self.inputs[1];
    for (int n = 0; n < sa.n; ++n) {
      const float* g = self.grad.data() + n * ys.sample();
      if (an.requires_grad) kt.axpy(sa.sample(), 1.0f, g, an.grad_data() + n * sa.sample());
      if (bn.requires_grad) kt.axpy(sb.sample(), 1.0f, g + sa.sample(), bn.grad_data() + n * sb.sample());
    }
  });
}

Tensor reshape(const Tensor& x, Shape s) {
  if (s.numel() != x.numel()) throw ShapeError("reshape: " + x.shape().str() + " -> " + s.str());
  std::vector<float> y(x.data().begin(), x.data().end());
  return make_result(s, std::move(y), {x}, [](Node& self) {
    kernels::active().axpy(self.grad.size(), 1.0f, self.grad.data(), self.inputs[0]->grad_data());
  });
}

Tensor resize_nearest(const Tensor& x, int h, int w) {
  const Shape s = x.shape();
  if (s.h == h && s.w == w) return x.detach();
  const Shape ys{s.n, s.c, h, w};
  std::vector<float> y(ys.numel());
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    const float* xb = x.ptr() + static_cast<std::size_t>(nc) * s.plane();
    float* yb = y.data() + static_cast<std::size_t>(nc) * ys.plane();
    for (int i = 0; i < h; ++i) {
      const int si = std::min(s.h - 1, static_cast<int>(std::floor((i + 0.5) * s.h / h)));
      for (int j = 0; j < w; ++j) {
        const int sj = std::min(s.w - 1, static_cast<int>(std::floor((j + 0.5) * s.w / w)));
        yb[static_cast<std::size_t>(i) * w + j] = xb[static_cast<std::size_t>(si) * s.w + sj];
      }
    }
  }
  return Tensor::from(ys, std::move(y));
}

Tensor external_scalar(float value, std::vector<Tensor> inputs, std::vector<std::vector<float>> grads) {
  if (inputs.size() != grads.size()) throw ShapeError("external_scalar: inputs/grads size mismatch");
  for (std::size_t i = 0; i < inputs.size(); ++i)
    if (grads[i].size() != inputs[i].numel()) throw ShapeError("external_scalar: gradient size mismatch");
  return make_result(Shape{1, 1, 1, 1}, {value}, std::move(inputs), [grads = std::move(grads)](Node& self) {
    const float up = self.grad[0];
    const auto& kt = kernels::active();
    for (std::size_t i = 0; i < self.inputs.size(); ++i)
      if (self.inputs[i]->requires_grad) kt.axpy(grads[i].size(), up, grads[i].data(), self.inputs[i]->grad_data());
  });
}

Tensor sum_scalars(const std::vector<Tensor>& terms) {
  if (terms.empty()) return Tensor::zeros(Shape{});
  float v = 0.0f;
  for (const auto& t : terms) v += t.item();
  return make_result(Shape{}, {v}, terms, [](Node& self) {
    for (auto& in : self.inputs)
      if (in->requires_grad) in->grad_data()[0] += self.grad[0];
  });
}

}  // namespace cardiosynth::nn
