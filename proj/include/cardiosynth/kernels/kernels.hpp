#pragma once

#include <cstddef>
#include <string_view>

namespace cardiosynth::kernels {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);

struct AdamCoeffs {
  float lr;
  float beta1;
  float beta2;
  float eps;
  float weight_decay;
  /// 1 - beta1^t and 1 - beta2^t.
  float bias_correction1;
  float bias_correction2;
};

/// Table of the data-parallel inner loops used by the tensor ops.
///
/// Every entry has a scalar reference implementation; SIMD tables must agree
/// with it up to floating-point reassociation (see tests/test_kernels.cpp).
struct KernelTable {
  Isa isa;

  /// Row-major C = alpha * op(A) * op(B) + beta * C, op(X) = X or X^T.
  /// op(A) is M x K, op(B) is K x N.
  void (*gemm)(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda, const float* b,
               int ldb, float beta, float* c, int ldc);
  /// y += a * x
  void (*axpy)(std::size_t n, float a, const float* x, float* y);
  /// y = a * x + b
  void (*scale_shift)(std::size_t n, float a, float b, const float* x, float* y);
  void (*leaky_relu)(std::size_t n, float slope, const float* x, float* y);
  /// dx += dy * (x > 0 ? 1 : slope)
  void (*leaky_relu_grad)(std::size_t n, float slope, const float* x, const float* dy, float* dx);
  /// Decoupled-weight-decay Adam step, in place on p, m, v.
  void (*adam)(std::size_t n, float* p, const float* g, float* m, float* v, const AdamCoeffs& c);
  double (*sum)(std::size_t n, const float* x);
  /// sum (x - mean)^2
  double (*sum_sq_dev)(std::size_t n, const float* x, double mean);
  double (*dot)(std::size_t n, const float* x, const float* y);
};

const KernelTable& scalar_table();
/// nullptr when the build has no AVX2 variant.
const KernelTable* avx2_table();
bool cpu_supports(Isa isa);

/// Table used by the tensor ops. Chosen once from CPU features; the
/// CARDIOSYNTH_KERNELS environment variable (scalar|avx2|auto) overrides.
const KernelTable& active();
/// Test hook; throws if the ISA is unavailable.
void set_active(Isa isa);

}  // namespace cardiosynth::kernels
