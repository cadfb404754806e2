// Built with -mavx2 (and without -mfma) when the target is x86-64.

#include "kernel_body.hpp"

#if defined(__x86_64__) && defined(__AVX2__)
#include <immintrin.h>

namespace mtlmol::simd {
namespace {

struct Avx2Policy {
  using reg = __m256d;
  static constexpr std::size_t width = 4;
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg set1(double a) { return _mm256_set1_pd(a); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_pd(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
  // max_pd returns the second operand unless a > b, matching `x > 0 ? x : 0`
  // for -0.0 and NaN.
  static reg relu(reg a) { return _mm256_max_pd(a, _mm256_setzero_pd()); }
  static reg masked_gt0(reg out, reg g) {
    return _mm256_and_pd(_mm256_cmp_pd(out, _mm256_setzero_pd(), _CMP_GT_OQ), g);
  }
};

}  // namespace

const KernelTable* avx2_kernels() {
  static const bool supported = __builtin_cpu_supports("avx2");
  static const KernelTable table = detail::make_table<Avx2Policy>(Isa::Avx2, "avx2");
  return supported ? &table : nullptr;
}

}  // namespace mtlmol::simd

#else

namespace mtlmol::simd {
const KernelTable* avx2_kernels() { return nullptr; }
}  // namespace mtlmol::simd

#endif
