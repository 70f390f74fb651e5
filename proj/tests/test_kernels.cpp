#include <doctest.h>

#include <cmath>
#include <vector>

#include "cardiosynth/core/rng.hpp"
#include "cardiosynth/kernels/kernels.hpp"

using namespace cardiosynth;
using kernels::KernelTable;

namespace {

std::vector<float> randv(std::size_t n, Rng& r) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(r.uniform(-1.0, 1.0));
  return v;
}

const KernelTable* simd() {
  if (!kernels::cpu_supports(kernels::Isa::avx2)) return nullptr;
  return kernels::avx2_table();
}

double max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("scalar gemm matches naive triple loop") {
    Rng r(1);
    const auto& s = kernels::scalar_table();
    for (bool ta : {false, true})
      for (bool tb : {false, true}) {
        const int m = 7, n = 5, k = 9;
        auto a = randv(m * k, r), b = randv(k * n, r), c = randv(m * n, r);
        std::vector<float> ref = c;
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) {
              const float av = ta ? a[p * m + i] : a[i * k + p];
              const float bv = tb ? b[j * k + p] : b[p * n + j];
              acc += static_cast<double>(av) * bv;
            }
            ref[i * n + j] = static_cast<float>(0.5 * acc + 2.0 * c[i * n + j]);
          }
        s.gemm(ta, tb, m, n, k, 0.5f, a.data(), ta ? m : k, b.data(), tb ? k : n, 2.0f, c.data(), n);
        CHECK(max_abs_diff(c, ref) < 1e-5);
      }
  }

  TEST_CASE("avx2 gemm agrees with scalar on ragged shapes") {
    const KernelTable* v = simd();
    if (!v) return;
    Rng r(2);
    const auto& s = kernels::scalar_table();
    const int shapes[][3] = {{1, 1, 1}, {6, 16, 8}, {13, 37, 29}, {100, 3, 300}, {97, 2100, 5}, {64, 64, 600}};
    for (const auto& sh : shapes)
      for (bool ta : {false, true})
        for (bool tb : {false, true})
          for (float beta : {0.0f, 1.0f}) {
            const int m = sh[0], n = sh[1], k = sh[2];
            auto a = randv(static_cast<std::size_t>(m) * k, r), b = randv(static_cast<std::size_t>(k) * n, r);
            auto c0 = randv(static_cast<std::size_t>(m) * n, r);
            auto c1 = c0;
            s.gemm(ta, tb, m, n, k, 1.0f, a.data(), ta ? m : k, b.data(), tb ? k : n, beta, c0.data(), n);
            v->gemm(ta, tb, m, n, k, 1.0f, a.data(), ta ? m : k, b.data(), tb ? k : n, beta, c1.data(), n);
            CHECK(max_abs_diff(c0, c1) < 1e-4 * std::sqrt(static_cast<double>(k)));
          }
  }

  TEST_CASE("avx2 elementwise and reductions agree with scalar") {
    const KernelTable* v = simd();
    if (!v) return;
    const auto& s = kernels::scalar_table();
    Rng r(3);
    for (std::size_t n : {1u, 7u, 8u, 33u, 1000u}) {
      auto x = randv(n, r), y = randv(n, r);
      auto y0 = y, y1 = y;
      s.axpy(n, 0.3f, x.data(), y0.data());
      v->axpy(n, 0.3f, x.data(), y1.data());
      CHECK(max_abs_diff(y0, y1) < 1e-6);
      s.scale_shift(n, 1.7f, -0.2f, x.data(), y0.data());
      v->scale_shift(n, 1.7f, -0.2f, x.data(), y1.data());
      CHECK(max_abs_diff(y0, y1) < 1e-6);
      s.leaky_relu(n, 0.2f, x.data(), y0.data());
      v->leaky_relu(n, 0.2f, x.data(), y1.data());
      CHECK(max_abs_diff(y0, y1) == 0.0);
      y0 = y;
      y1 = y;
      s.leaky_relu_grad(n, 0.2f, x.data(), y.data(), y0.data());
      v->leaky_relu_grad(n, 0.2f, x.data(), y.data(), y1.data());
      CHECK(max_abs_diff(y0, y1) < 1e-6);
      CHECK(std::abs(s.sum(n, x.data()) - v->sum(n, x.data())) < 1e-9 * n);
      CHECK(std::abs(s.sum_sq_dev(n, x.data(), 0.1) - v->sum_sq_dev(n, x.data(), 0.1)) < 1e-9 * n);
      CHECK(std::abs(s.dot(n, x.data(), y.data()) - v->dot(n, x.data(), y.data())) < 1e-9 * n);

      kernels::AdamCoeffs c{1e-3f, 0.9f, 0.999f, 1e-8f, 5e-5f, 0.1f, 0.001f};
      auto p0 = x, p1 = x;
      std::vector<float> m0(n, 0.01f), m1 = m0, v0(n, 0.02f), v1 = v0;
      s.adam(n, p0.data(), y.data(), m0.data(), v0.data(), c);
      v->adam(n, p1.data(), y.data(), m1.data(), v1.data(), c);
      CHECK(max_abs_diff(p0, p1) < 1e-6);
      CHECK(max_abs_diff(m0, m1) < 1e-7);
      CHECK(max_abs_diff(v0, v1) < 1e-7);
    }
  }

  TEST_CASE("active table can be switched") {
    const auto before = kernels::active().isa;
    kernels::set_active(kernels::Isa::scalar);
    CHECK(kernels::active().isa == kernels::Isa::scalar);
    kernels::set_active(before);
  }
}
