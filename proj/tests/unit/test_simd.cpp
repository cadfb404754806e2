#include <array>
#include <doctest.h>

#include <bit>
#include <cstdint>
#include <random>
#include <vector>

#include "mtlmol/simd/kernels.hpp"

using namespace mtlmol::simd;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, double zero_fraction = 0.0) {
  std::uniform_real_distribution<double> u(-3.0, 3.0), p(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = p(rng) < zero_fraction ? 0.0 : u(rng);
  return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

std::vector<const KernelTable*> vector_tables() {
  std::vector<const KernelTable*> out;
  if (avx2_kernels()) out.push_back(avx2_kernels());
  if (neon_kernels()) out.push_back(neon_kernels());
  return out;
}

}  // namespace

TEST_CASE("scalar kernels match naive loops") {
  const KernelTable& k = scalar_kernels();
  std::mt19937_64 rng(1);
  const std::size_t m = 3, kk = 5, n = 4;
  const auto a = random_vec(m * kk, rng), b = random_vec(kk * n, rng);
  std::vector<double> c(m * n, 0.0);
  k.gemm_nn(m, kk, n, a.data(), b.data(), c.data());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < kk; ++p) s += a[i * kk + p] * b[p * n + j];
      CHECK(c[i * n + j] == doctest::Approx(s).epsilon(1e-14));
    }
  }
  // A^T B with A [m x kk], B [m x n]
  const auto bt = random_vec(m * n, rng);
  std::vector<double> ct(kk * n, 0.0);
  k.gemm_tn(m, kk, n, a.data(), bt.data(), ct.data());
  for (std::size_t p = 0; p < kk; ++p) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += a[i * kk + p] * bt[i * n + j];
      CHECK(ct[p * n + j] == doctest::Approx(s).epsilon(1e-14));
    }
  }
  std::vector<double> x{-1.0, 0.0, 2.0, -0.0}, r(4);
  k.relu(4, x.data(), r.data());
  CHECK(r == std::vector<double>{0.0, 0.0, 2.0, 0.0});
}

TEST_CASE("vector kernels are bitwise identical to scalar") {
  const auto tables = vector_tables();
  if (tables.empty()) MESSAGE("no vector ISA available on this machine; equivalence check is vacuous");
  const KernelTable& s = scalar_kernels();
  std::mt19937_64 rng(42);
  for (const KernelTable* v : tables) {
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 17u, 64u, 301u}) {
      const auto x = random_vec(n, rng, 0.2), y = random_vec(n, rng, 0.2);
      auto y1 = y, y2 = y;
      s.axpy(n, 0.37, x.data(), y1.data());
      v->axpy(n, 0.37, x.data(), y2.data());
      CHECK(bitwise_equal(y1, y2));

      std::vector<double> o1(n), o2(n);
      for (auto op : {&KernelTable::add, &KernelTable::sub, &KernelTable::mul}) {
        (s.*op)(n, x.data(), y.data(), o1.data());
        (v->*op)(n, x.data(), y.data(), o2.data());
        CHECK(bitwise_equal(o1, o2));
      }
      s.relu(n, x.data(), o1.data());
      v->relu(n, x.data(), o2.data());
      CHECK(bitwise_equal(o1, o2));

      auto g1 = y, g2 = y;
      s.relu_backward(n, o1.data(), x.data(), g1.data());
      v->relu_backward(n, o1.data(), x.data(), g2.data());
      CHECK(bitwise_equal(g1, g2));
    }
    for (auto [m, kk, n] : {std::array<std::size_t, 3>{1, 1, 1}, {3, 5, 7}, {8, 39, 16}, {17, 33, 301}}) {
      const auto a = random_vec(m * kk, rng, 0.3), b = random_vec(kk * n, rng), bt = random_vec(m * n, rng);
      std::vector<double> c1(m * n, 0.5), c2(m * n, 0.5);
      s.gemm_nn(m, kk, n, a.data(), b.data(), c1.data());
      v->gemm_nn(m, kk, n, a.data(), b.data(), c2.data());
      CHECK(bitwise_equal(c1, c2));
      std::vector<double> t1(kk * n, 0.0), t2(kk * n, 0.0);
      s.gemm_tn(m, kk, n, a.data(), bt.data(), t1.data());
      v->gemm_tn(m, kk, n, a.data(), bt.data(), t2.data());
      CHECK(bitwise_equal(t1, t2));
    }
  }
}

TEST_CASE("runtime selection") {
  CHECK(set_active(Isa::Scalar));
  CHECK(active().isa == Isa::Scalar);
  if (avx2_kernels()) {
    CHECK(set_active(Isa::Avx2));
    CHECK(active().isa == Isa::Avx2);
  } else {
    CHECK_FALSE(set_active(Isa::Avx2));
  }
  CHECK(to_string(Isa::Neon) == "neon");
  // Leave the best available table active for the other tests.
  if (!set_active(Isa::Avx2)) set_active(Isa::Neon);
}
