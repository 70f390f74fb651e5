#include "cardiosynth/nn/layers.hpp"

#include <cmath>
#include <cstring>

#include "cardiosynth/core/error.hpp"
#include "cardiosynth/kernels/kernels.hpp"

namespace cardiosynth::nn {

Tensor ParamStore::add(const std::string& name, Shape s, std::vector<float> init) {
  for (const auto& [n, t] : params_)
    if (n == name) throw Error("duplicate parameter name " + name);
  Tensor t = Tensor::from(s, std::move(init), true);
  params_.emplace_back(name, t);
  return t;
}

BatchStats* ParamStore::add_stats(const std::string& name, int channels) {
  stats_.emplace_back(name, std::make_unique<BatchStats>(channels));
  return stats_.back().second.get();
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.second);
  return out;
}

std::size_t ParamStore::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.second.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.second.zero_grad();
}

namespace {

struct Writer {
  std::vector<std::uint8_t> out;
  template <class T>
  void pod(T v) {
    const auto* b = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), b, b + sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
  }
  void floats(const float* p, std::size_t n) {
    const auto* b = reinterpret_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n * sizeof(float));
  }
};

struct Reader {
  std::span<const std::uint8_t> in;
  std::size_t pos = 0;
  void need(std::size_t n) const {
    if (pos + n > in.size()) throw FormatError("parameter blob truncated");
  }
  template <class T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(in.data() + pos), n);
    pos += n;
    return s;
  }
  void floats(float* p, std::size_t n) {
    need(n * sizeof(float));
    std::memcpy(p, in.data() + pos, n * sizeof(float));
    pos += n * sizeof(float);
  }
};

}  // namespace

std::vector<std::uint8_t> ParamStore::serialize() const {
  Writer w;
  w.out = {'C', 'S', 'P', 'B'};
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(params_.size()));
  for (const auto& [name, t] : params_) {
    w.str(name);
    const Shape& s = t.shape();
    for (int d : {s.n, s.c, s.h, s.w}) w.pod<std::int32_t>(d);
    w.floats(t.ptr(), t.numel());
  }
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(stats_.size()));
  for (const auto& [name, st] : stats_) {
    w.str(name);
    w.pod<std::int32_t>(static_cast<std::int32_t>(st->mean.size()));
    w.floats(st->mean.data(), st->mean.size());
    w.floats(st->var.data(), st->var.size());
  }
  return std::move(w.out);
}

void ParamStore::load(std::span<const std::uint8_t> blob) {
  Reader r{blob};
  r.need(4);
  if (std::memcmp(blob.data(), "CSPB", 4) != 0) throw FormatError("not a parameter blob");
  r.pos = 4;
  if (r.pod<std::uint32_t>() != params_.size()) throw FormatError("parameter count mismatch");
  for (auto& [name, t] : params_) {
    if (r.str() != name) throw FormatError("parameter name mismatch at " + name);
    Shape s;
    s.n = r.pod<std::int32_t>();
    s.c = r.pod<std::int32_t>();
    s.h = r.pod<std::int32_t>();
    s.w = r.pod<std::int32_t>();
    if (!(s == t.shape())) throw FormatError("parameter shape mismatch at " + name);
    r.floats(t.ptr(), t.numel());
  }
  if (r.pod<std::uint32_t>() != stats_.size()) throw FormatError("statistics count mismatch");
  for (auto& [name, st] : stats_) {
    if (r.str() != name) throw FormatError("statistics name mismatch at " + name);
    if (r.pod<std::int32_t>() != static_cast<std::int32_t>(st->mean.size()))
      throw FormatError("statistics size mismatch at " + name);
    r.floats(st->mean.data(), st->mean.size());
    r.floats(st->var.data(), st->var.size());
  }
  if (r.pos != blob.size()) throw FormatError("trailing bytes in parameter blob");
}

std::vector<float> he_normal(std::size_t n, int fan_in, Rng& rng) {
  const double sd = std::sqrt(2.0 / fan_in);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal(0.0, sd));
  return v;
}

Conv2d::Conv2d(ParamStore& store, const std::string& name, int cin, int cout, int kernel_, int stride_, Rng& rng,
               bool with_bias)
    : kernel(kernel_), stride(stride_), pad(kernel_ / 2) {
  const Shape ws{cout, cin, kernel, kernel};
  weight = store.add(name + ".weight", ws, he_normal(ws.numel(), cin * kernel * kernel, rng));
  if (with_bias) bias = store.add(name + ".bias", Shape{1, cout, 1, 1}, std::vector<float>(cout, 0.0f));
}

void Conv2d::zero_init() {
  std::fill(weight.data().begin(), weight.data().end(), 0.0f);
  if (bias.defined()) std::fill(bias.data().begin(), bias.data().end(), 0.0f);
}

Linear::Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng) {
  const Shape ws{out, in, 1, 1};
  weight = store.add(name + ".weight", ws, he_normal(ws.numel(), in, rng));
  bias = store.add(name + ".bias", Shape{1, out, 1, 1}, std::vector<float>(out, 0.0f));
}

Norm::Norm(ParamStore& store, const std::string& name, NormKind k, int channels) : kind(k) {
  if (kind == NormKind::batch) stats = store.add_stats(name + ".running", channels);
}

Tensor Norm::operator()(const Tensor& x, bool training) const {
  switch (kind) {
    case NormKind::batch:
      return batch_norm(x, stats, training);
    case NormKind::instance:
      return instance_norm(x);
    case NormKind::none:
      break;
  }
  return x;
}

Adam::Adam(std::vector<Tensor> params, AdamOptions opts) : params_(std::move(params)), opts_(opts) {
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0f);
    v_.emplace_back(p.numel(), 0.0f);
  }
}

void Adam::step() {
  ++t_;
  kernels::AdamCoeffs c{};
  c.lr = static_cast<float>(opts_.lr);
  c.beta1 = static_cast<float>(opts_.beta1);
  c.beta2 = static_cast<float>(opts_.beta2);
  c.eps = static_cast<float>(opts_.eps);
  c.weight_decay = static_cast<float>(opts_.weight_decay);
  c.bias_correction1 = static_cast<float>(1.0 - std::pow(opts_.beta1, static_cast<double>(t_)));
  c.bias_correction2 = static_cast<float>(1.0 - std::pow(opts_.beta2, static_cast<double>(t_)));
  const auto& kt = kernels::active();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    kt.adam(p.numel(), p.ptr(), p.grad().data(), m_[i].data(), v_[i].data(), c);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace cardiosynth::nn
