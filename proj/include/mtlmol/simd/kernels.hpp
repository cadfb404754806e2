#pragma once

#include <cstddef>
#include <string_view>

// Dense double-precision inner loops used by the autodiff engine.
//
// Every ISA variant evaluates each output element with the same sequence
// of IEEE operations as the scalar reference (no FMA contraction, identical
// accumulation order), so results are bitwise identical across variants.
// The equivalence tests rely on this.

namespace mtlmol::simd {

enum class Isa { Scalar, Avx2, Neon };

struct KernelTable {
  Isa isa;
  const char* name;

  // y += a * x
  void (*axpy)(std::size_t n, double a, const double* x, double* y);
  // out = x + y, out = x - y, out = x * y (out may alias x or y)
  void (*add)(std::size_t n, const double* x, const double* y, double* out);
  void (*sub)(std::size_t n, const double* x, const double* y, double* out);
  void (*mul)(std::size_t n, const double* x, const double* y, double* out);
  // out = max(x, 0)
  void (*relu)(std::size_t n, const double* x, double* out);
  // grad_in += (out > 0 ? grad : 0)
  void (*relu_backward)(std::size_t n, const double* out, const double* grad, double* grad_in);
  // C[m x n] += A[m x k] * B[k x n], all row-major and contiguous.
  void (*gemm_nn)(std::size_t m, std::size_t k, std::size_t n, const double* a,
                  const double* b, double* c);
  // C[k x n] += A[m x k]^T * B[m x n]
  void (*gemm_tn)(std::size_t m, std::size_t k, std::size_t n, const double* a,
                  const double* b, double* c);
};

const KernelTable& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks support.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

// The table in use. Chosen once from CPU features; the environment variable
// MTLMOLNET_SIMD=scalar|avx2|neon overrides the choice when supported.
const KernelTable& active();

// Test hook. Returns false (and changes nothing) if `isa` is unavailable.
bool set_active(Isa isa);

std::string_view to_string(Isa isa);

}  // namespace mtlmol::simd
