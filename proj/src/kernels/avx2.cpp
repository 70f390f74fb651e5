// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cardiosynth/kernels/kernels.hpp"

namespace cardiosynth::kernels {

namespace {

constexpr int kMR = 6;
constexpr int kNR = 16;
constexpr int kMC = 96;
constexpr int kKC = 256;
constexpr int kNC = 2048;

inline float load_a(bool ta, const float* a, int lda, int i, int p) {
  return ta ? a[static_cast<std::ptrdiff_t>(p) * lda + i] : a[static_cast<std::ptrdiff_t>(i) * lda + p];
}
inline float load_b(bool tb, const float* b, int ldb, int p, int j) {
  return tb ? b[static_cast<std::ptrdiff_t>(j) * ldb + p] : b[static_cast<std::ptrdiff_t>(p) * ldb + j];
}

// Ap layout: per 6-row panel, kc groups of 6 values.
void pack_a(bool ta, const float* a, int lda, int i0, int mc, int p0, int kc, float* ap) {
  for (int ir = 0; ir < mc; ir += kMR) {
    const int mr = std::min(kMR, mc - ir);
    for (int p = 0; p < kc; ++p) {
      for (int i = 0; i < mr; ++i) ap[i] = load_a(ta, a, lda, i0 + ir + i, p0 + p);
      for (int i = mr; i < kMR; ++i) ap[i] = 0.0f;
      ap += kMR;
    }
  }
}

// Bp layout: per 16-column panel, kc rows of 16 values.
void pack_b(bool tb, const float* b, int ldb, int p0, int kc, int j0, int nc, float* bp) {
  for (int jr = 0; jr < nc; jr += kNR) {
    const int nr = std::min(kNR, nc - jr);
    for (int p = 0; p < kc; ++p) {
      if (!tb && nr == kNR) {
        const float* src = b + static_cast<std::ptrdiff_t>(p0 + p) * ldb + j0 + jr;
        _mm256_storeu_ps(bp, _mm256_loadu_ps(src));
        _mm256_storeu_ps(bp + 8, _mm256_loadu_ps(src + 8));
      } else {
        for (int j = 0; j < nr; ++j) bp[j] = load_b(tb, b, ldb, p0 + p, j0 + jr + j);
        for (int j = nr; j < kNR; ++j) bp[j] = 0.0f;
      }
      bp += kNR;
    }
  }
}

// 6x16 register tile: C[0:mr, 0:nr] += alpha * Ap * Bp.
void micro_kernel(int kc, const float* ap, const float* bp, float alpha, float* c, int ldc, int mr, int nr) {
  __m256 c00 = _mm256_setzero_ps(), c01 = _mm256_setzero_ps();
  __m256 c10 = _mm256_setzero_ps(), c11 = _mm256_setzero_ps();
  __m256 c20 = _mm256_setzero_ps(), c21 = _mm256_setzero_ps();
  __m256 c30 = _mm256_setzero_ps(), c31 = _mm256_setzero_ps();
  __m256 c40 = _mm256_setzero_ps(), c41 = _mm256_setzero_ps();
  __m256 c50 = _mm256_setzero_ps(), c51 = _mm256_setzero_ps();
  for (int p = 0; p < kc; ++p) {
    const __m256 b0 = _mm256_loadu_ps(bp);
    const __m256 b1 = _mm256_loadu_ps(bp + 8);
    __m256 a = _mm256_broadcast_ss(ap + 0);
    c00 = _mm256_fmadd_ps(a, b0, c00);
    c01 = _mm256_fmadd_ps(a, b1, c01);
    a = _mm256_broadcast_ss(ap + 1);
    c10 = _mm256_fmadd_ps(a, b0, c10);
    c11 = _mm256_fmadd_ps(a, b1, c11);
    a = _mm256_broadcast_ss(ap + 2);
    c20 = _mm256_fmadd_ps(a, b0, c20);
    c21 = _mm256_fmadd_ps(a, b1, c21);
    a = _mm256_broadcast_ss(ap + 3);
    c30 = _mm256_fmadd_ps(a, b0, c30);
    c31 = _mm256_fmadd_ps(a, b1, c31);
    a = _mm256_broadcast_ss(ap + 4);
    c40 = _mm256_fmadd_ps(a, b0, c40);
    c41 = _mm256_fmadd_ps(a, b1, c41);
    a = _mm256_broadcast_ss(ap + 5);
    c50 = _mm256_fmadd_ps(a, b0, c50);
    c51 = _mm256_fmadd_ps(a, b1, c51);
    ap += kMR;
    bp += kNR;
  }
  const __m256 va = _mm256_set1_ps(alpha);
  alignas(32) float tile[kMR][kNR];
  _mm256_store_ps(tile[0], _mm256_mul_ps(va, c00));
  _mm256_store_ps(tile[0] + 8, _mm256_mul_ps(va, c01));
  _mm256_store_ps(tile[1], _mm256_mul_ps(va, c10));
  _mm256_store_ps(tile[1] + 8, _mm256_mul_ps(va, c11));
  _mm256_store_ps(tile[2], _mm256_mul_ps(va, c20));
  _mm256_store_ps(tile[2] + 8, _mm256_mul_ps(va, c21));
  _mm256_store_ps(tile[3], _mm256_mul_ps(va, c30));
  _mm256_store_ps(tile[3] + 8, _mm256_mul_ps(va, c31));
  _mm256_store_ps(tile[4], _mm256_mul_ps(va, c40));
  _mm256_store_ps(tile[4] + 8, _mm256_mul_ps(va, c41));
  _mm256_store_ps(tile[5], _mm256_mul_ps(va, c50));
  _mm256_store_ps(tile[5] + 8, _mm256_mul_ps(va, c51));
  if (nr == kNR) {
    for (int i = 0; i < mr; ++i) {
      float* ci = c + static_cast<std::ptrdiff_t>(i) * ldc;
      _mm256_storeu_ps(ci, _mm256_add_ps(_mm256_loadu_ps(ci), _mm256_load_ps(tile[i])));
      _mm256_storeu_ps(ci + 8, _mm256_add_ps(_mm256_loadu_ps(ci + 8), _mm256_load_ps(tile[i] + 8)));
    }
  } else {
    for (int i = 0; i < mr; ++i) {
      float* ci = c + static_cast<std::ptrdiff_t>(i) * ldc;
      for (int j = 0; j < nr; ++j) ci[j] += tile[i][j];
    }
  }
}

void gemm(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda, const float* b, int ldb,
          float beta, float* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    float* ci = c + static_cast<std::ptrdiff_t>(i) * ldc;
    if (beta == 0.0f) {
      std::fill(ci, ci + n, 0.0f);
    } else if (beta != 1.0f) {
      for (int j = 0; j < n; ++j) ci[j] *= beta;
    }
  }
  if (m == 0 || n == 0 || k == 0 || alpha == 0.0f) return;

  thread_local std::vector<float> ap_buf, bp_buf;
  ap_buf.resize(static_cast<std::size_t>(kMC) * kKC);
  for (int jc = 0; jc < n; jc += kNC) {
    const int nc = std::min(kNC, n - jc);
    const int nc_padded = (nc + kNR - 1) / kNR * kNR;
    for (int pc = 0; pc < k; pc += kKC) {
      const int kc = std::min(kKC, k - pc);
      bp_buf.resize(static_cast<std::size_t>(nc_padded) * kc);
      pack_b(tb, b, ldb, pc, kc, jc, nc, bp_buf.data());
      for (int ic = 0; ic < m; ic += kMC) {
        const int mc = std::min(kMC, m - ic);
        pack_a(ta, a, lda, ic, mc, pc, kc, ap_buf.data());
        for (int jr = 0; jr < nc; jr += kNR) {
          const int nr = std::min(kNR, nc - jr);
          const float* bp = bp_buf.data() + static_cast<std::size_t>(jr / kNR) * kc * kNR;
          for (int ir = 0; ir < mc; ir += kMR) {
            const int mr = std::min(kMR, mc - ir);
            const float* ap = ap_buf.data() + static_cast<std::size_t>(ir / kMR) * kc * kMR;
            micro_kernel(kc, ap, bp, alpha, c + static_cast<std::ptrdiff_t>(ic + ir) * ldc + jc + jr, ldc, mr, nr);
          }
        }
      }
    }
  }
}

void axpy(std::size_t n, float a, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_shift(std::size_t n, float a, float b, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(a), vb = _mm256_set1_ps(b);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vb));
  for (; i < n; ++i) y[i] = a * x[i] + b;
}

void leaky_relu(std::size_t n, float slope, const float* x, float* y) {
  const __m256 vs = _mm256_set1_ps(slope), zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256 pos = _mm256_cmp_ps(v, zero, _CMP_GT_OQ);
    _mm256_storeu_ps(y + i, _mm256_blendv_ps(_mm256_mul_ps(vs, v), v, pos));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : slope * x[i];
}

void leaky_relu_grad(std::size_t n, float slope, const float* x, const float* dy, float* dx) {
  const __m256 vs = _mm256_set1_ps(slope), zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256 g = _mm256_loadu_ps(dy + i);
    const __m256 pos = _mm256_cmp_ps(v, zero, _CMP_GT_OQ);
    const __m256 d = _mm256_blendv_ps(_mm256_mul_ps(vs, g), g, pos);
    _mm256_storeu_ps(dx + i, _mm256_add_ps(_mm256_loadu_ps(dx + i), d));
  }
  for (; i < n; ++i) dx[i] += x[i] > 0.0f ? dy[i] : slope * dy[i];
}

void adam(std::size_t n, float* p, const float* g, float* m, float* v, const AdamCoeffs& c) {
  const float inv_bc1 = 1.0f / c.bias_correction1;
  const float inv_bc2 = 1.0f / c.bias_correction2;
  const __m256 b1 = _mm256_set1_ps(c.beta1), nb1 = _mm256_set1_ps(1.0f - c.beta1);
  const __m256 b2 = _mm256_set1_ps(c.beta2), nb2 = _mm256_set1_ps(1.0f - c.beta2);
  const __m256 ibc1 = _mm256_set1_ps(inv_bc1), ibc2 = _mm256_set1_ps(inv_bc2);
  const __m256 lr = _mm256_set1_ps(c.lr), eps = _mm256_set1_ps(c.eps), wd = _mm256_set1_ps(c.weight_decay);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 gi = _mm256_loadu_ps(g + i);
    const __m256 mi = _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(nb1, gi));
    const __m256 vi =
        _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(v + i)), _mm256_mul_ps(_mm256_mul_ps(nb2, gi), gi));
    _mm256_storeu_ps(m + i, mi);
    _mm256_storeu_ps(v + i, vi);
    const __m256 mhat = _mm256_mul_ps(mi, ibc1);
    const __m256 vhat = _mm256_mul_ps(vi, ibc2);
    const __m256 pi = _mm256_loadu_ps(p + i);
    const __m256 step =
        _mm256_add_ps(_mm256_div_ps(mhat, _mm256_add_ps(_mm256_sqrt_ps(vhat), eps)), _mm256_mul_ps(wd, pi));
    _mm256_storeu_ps(p + i, _mm256_sub_ps(pi, _mm256_mul_ps(lr, step)));
  }
  for (; i < n; ++i) {
    m[i] = c.beta1 * m[i] + (1.0f - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (1.0f - c.beta2) * g[i] * g[i];
    const float mhat = m[i] * inv_bc1;
    const float vhat = v[i] * inv_bc2;
    p[i] -= c.lr * (mhat / (std::sqrt(vhat) + c.eps) + c.weight_decay * p[i]);
  }
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v), hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double sum(std::size_t n, const float* x) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    acc0 = _mm256_add_pd(acc0, _mm256_cvtps_pd(_mm256_castps256_ps128(v)));
    acc1 = _mm256_add_pd(acc1, _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)));
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i];
  return s;
}

double sum_sq_dev(std::size_t n, const float* x, double mean) {
  const __m256d vm = _mm256_set1_pd(mean);
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256d d0 = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(v)), vm);
    const __m256d d1 = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)), vm);
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
    const double d = x[i] - mean;
    s += d * d;
  }
  return s;
}

double dot(std::size_t n, const float* x, const float* y) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 a = _mm256_loadu_ps(x + i), b = _mm256_loadu_ps(y + i);
    acc0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(a)), _mm256_cvtps_pd(_mm256_castps256_ps128(b)), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(a, 1)), _mm256_cvtps_pd(_mm256_extractf128_ps(b, 1)),
                           acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += static_cast<double>(x[i]) * y[i];
  return s;
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable t{Isa::avx2, gemm, axpy, scale_shift, leaky_relu, leaky_relu_grad,
                             adam,      sum,  sum_sq_dev,  dot};
  return &t;
}

}  // namespace cardiosynth::kernels
