#include <cstdlib>
#include <string>

#include "kernel_body.hpp"

namespace mtlmol::simd {
namespace {

struct ScalarPolicy {
  using reg = double;
  static constexpr std::size_t width = 1;
  static reg load(const double* p) { return *p; }
  static void store(double* p, reg v) { *p = v; }
  static reg set1(double a) { return a; }
  static reg add(reg a, reg b) { return a + b; }
  static reg sub(reg a, reg b) { return a - b; }
  static reg mul(reg a, reg b) { return a * b; }
  static reg relu(reg a) { return a > 0.0 ? a : 0.0; }
  static reg masked_gt0(reg out, reg g) { return out > 0.0 ? g : 0.0; }
};

const KernelTable* g_override = nullptr;

const KernelTable& select_default() {
  const char* env = std::getenv("MTLMOLNET_SIMD");
  const std::string want = env ? env : "";
  if (want == "scalar") return scalar_kernels();
  if (want == "neon" && neon_kernels()) return *neon_kernels();
  if (want == "avx2" && avx2_kernels()) return *avx2_kernels();
  if (const auto* t = avx2_kernels()) return *t;
  if (const auto* t = neon_kernels()) return *t;
  return scalar_kernels();
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table = detail::make_table<ScalarPolicy>(Isa::Scalar, "scalar");
  return table;
}

const KernelTable& active() {
  if (g_override) return *g_override;
  static const KernelTable& chosen = select_default();
  return chosen;
}

bool set_active(Isa isa) {
  const KernelTable* t = nullptr;
  switch (isa) {
    case Isa::Scalar: t = &scalar_kernels(); break;
    case Isa::Avx2: t = avx2_kernels(); break;
    case Isa::Neon: t = neon_kernels(); break;
  }
  if (!t) return false;
  g_override = t;
  return true;
}

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

}  // namespace mtlmol::simd
