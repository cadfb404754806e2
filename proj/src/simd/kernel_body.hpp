#pragma once

// ISA-independent kernel bodies. Each translation unit supplies a vector
// policy V with:
//   using reg; static constexpr std::size_t width;
//   load/store/set1/zero/add/sub/mul/relu/masked_gt0(out, g)
// and instantiates make_table<V>(). The tail loop always goes through the
// scalar expressions, which match the vector lanes operation for operation.

#include <cstddef>

#include "mtlmol/simd/kernels.hpp"

namespace mtlmol::simd::detail {

template <class V>
void axpy(std::size_t n, double a, const double* x, double* y) {
  std::size_t i = 0;
  if constexpr (V::width > 1) {
    const auto va = V::set1(a);
    for (; i + V::width <= n; i += V::width) {
      V::store(y + i, V::add(V::load(y + i), V::mul(va, V::load(x + i))));
    }
  }
  for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

template <class V, class VecOp, class ScalarOp>
inline void binary(std::size_t n, const double* x, const double* y, double* out, VecOp vop,
                   ScalarOp sop) {
  std::size_t i = 0;
  if constexpr (V::width > 1) {
    for (; i + V::width <= n; i += V::width) {
      V::store(out + i, vop(V::load(x + i), V::load(y + i)));
    }
  }
  for (; i < n; ++i) out[i] = sop(x[i], y[i]);
}

template <class V>
void add(std::size_t n, const double* x, const double* y, double* out) {
  binary<V>(n, x, y, out, [](auto a, auto b) { return V::add(a, b); },
            [](double a, double b) { return a + b; });
}

template <class V>
void sub(std::size_t n, const double* x, const double* y, double* out) {
  binary<V>(n, x, y, out, [](auto a, auto b) { return V::sub(a, b); },
            [](double a, double b) { return a - b; });
}

template <class V>
void mul(std::size_t n, const double* x, const double* y, double* out) {
  binary<V>(n, x, y, out, [](auto a, auto b) { return V::mul(a, b); },
            [](double a, double b) { return a * b; });
}

template <class V>
void relu(std::size_t n, const double* x, double* out) {
  std::size_t i = 0;
  if constexpr (V::width > 1) {
    for (; i + V::width <= n; i += V::width) V::store(out + i, V::relu(V::load(x + i)));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

template <class V>
void relu_backward(std::size_t n, const double* out, const double* grad, double* grad_in) {
  std::size_t i = 0;
  if constexpr (V::width > 1) {
    for (; i + V::width <= n; i += V::width) {
      const auto g = V::masked_gt0(V::load(out + i), V::load(grad + i));
      V::store(grad_in + i, V::add(V::load(grad_in + i), g));
    }
  }
  for (; i < n; ++i) grad_in[i] = grad_in[i] + (out[i] > 0.0 ? grad[i] : 0.0);
}

// Row-axpy formulation: every C element accumulates over k in index order.
// Zero multipliers are skipped (relu activations are sparse); the skip is
// identical in every variant.
template <class V>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
             double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = arow[p];
      if (s == 0.0) continue;
      axpy<V>(n, s, b + p * n, crow);
    }
  }
}

template <class V>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
             double* c) {
  for (std::size_t r = 0; r < m; ++r) {
    const double* arow = a + r * k;
    const double* brow = b + r * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = arow[p];
      if (s == 0.0) continue;
      axpy<V>(n, s, brow, c + p * n);
    }
  }
}

template <class V>
KernelTable make_table(Isa isa, const char* name) {
  return KernelTable{isa,         name,          &axpy<V>,          &add<V>,
                     &sub<V>,     &mul<V>,       &relu<V>,          &relu_backward<V>,
                     &gemm_nn<V>, &gemm_tn<V>};
}

}  // namespace mtlmol::simd::detail
