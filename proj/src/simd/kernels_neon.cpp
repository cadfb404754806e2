#include "kernel_body.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

namespace mtlmol::simd {
namespace {

struct NeonPolicy {
  using reg = float64x2_t;
  static constexpr std::size_t width = 2;
  static reg load(const double* p) { return vld1q_f64(p); }
  static void store(double* p, reg v) { vst1q_f64(p, v); }
  static reg set1(double a) { return vdupq_n_f64(a); }
  static reg add(reg a, reg b) { return vaddq_f64(a, b); }
  static reg sub(reg a, reg b) { return vsubq_f64(a, b); }
  // vmulq (not vfmaq) keeps rounding identical to the scalar path.
  static reg mul(reg a, reg b) { return vmulq_f64(a, b); }
  static reg relu(reg a) {
    const uint64x2_t gt = vcgtq_f64(a, vdupq_n_f64(0.0));
    return vreinterpretq_f64_u64(vandq_u64(gt, vreinterpretq_u64_f64(a)));
  }
  static reg masked_gt0(reg out, reg g) {
    const uint64x2_t gt = vcgtq_f64(out, vdupq_n_f64(0.0));
    return vreinterpretq_f64_u64(vandq_u64(gt, vreinterpretq_u64_f64(g)));
  }
};

}  // namespace

const KernelTable* neon_kernels() {
  static const KernelTable table = detail::make_table<NeonPolicy>(Isa::Neon, "neon");
  return &table;
}

}  // namespace mtlmol::simd

#else

namespace mtlmol::simd {
const KernelTable* neon_kernels() { return nullptr; }
}  // namespace mtlmol::simd

#endif
