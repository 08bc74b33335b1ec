#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "grab/simd/kernels.hpp"

using namespace grab::simd;

namespace {

std::vector<const KernelTable*> Tables() {
  std::vector<const KernelTable*> t{&ScalarKernels()};
  if (auto* k = Avx2Kernels()) t.push_back(k);
  if (auto* k = NeonKernels()) t.push_back(k);
  return t;
}

}  // namespace

TEST_SUITE("simd") {
  TEST_CASE("vector kernels agree with the scalar reference across tail lengths") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<float> u(-1.f, 1.f);
    const auto& ref = ScalarKernels();
    for (const auto* k : Tables()) {
      for (std::size_t n = 0; n <= 70; ++n) {
        std::vector<float> a(n), b(n);
        for (auto& x : a) x = u(rng);
        for (auto& x : b) x = u(rng);
        CHECK(k->dot(a.data(), b.data(), n) == doctest::Approx(ref.dot(a.data(), b.data(), n)).epsilon(1e-5));

        auto acc1 = a, acc2 = a;
        ref.accumulate(acc1.data(), b.data(), n);
        k->accumulate(acc2.data(), b.data(), n);
        CHECK(acc1 == acc2);

        auto m1 = a, m2 = a;
        ref.max_inplace(m1.data(), b.data(), n);
        k->max_inplace(m2.data(), b.data(), n);
        CHECK(m1 == m2);
      }
    }
  }

  TEST_CASE("dot_batch matches per-row dot for odd row counts and dims") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<float> u(-1.f, 1.f);
    for (const auto* k : Tables()) {
      for (std::size_t dim : {1u, 7u, 8u, 17u, 64u, 65u}) {
        for (std::size_t rows : {0u, 1u, 3u, 4u, 5u, 9u}) {
          std::vector<float> q(dim), m(rows * dim), out(rows);
          for (auto& x : q) x = u(rng);
          for (auto& x : m) x = u(rng);
          k->dot_batch(q.data(), m.data(), rows, dim, out.data());
          for (std::size_t r = 0; r < rows; ++r) {
            CHECK(out[r] == doctest::Approx(ScalarKernels().dot(q.data(), m.data() + r * dim, dim)).epsilon(1e-5));
          }
        }
      }
    }
  }

  TEST_CASE("hamming_batch is popcount of xor") {
    std::mt19937_64 rng(3);
    for (const auto* k : Tables()) {
      for (std::size_t n = 0; n <= 37; ++n) {
        std::vector<std::uint64_t> h(n);
        for (auto& x : h) x = rng();
        const std::uint64_t q = rng();
        std::vector<std::uint32_t> out(n);
        k->hamming_batch(q, h.data(), n, out.data());
        for (std::size_t i = 0; i < n; ++i) CHECK(out[i] == static_cast<std::uint32_t>(__builtin_popcountll(q ^ h[i])));
      }
    }
  }

  TEST_CASE("isa override") {
    const Isa before = ActiveIsa();
    CHECK(SetActiveIsa(Isa::kScalar));
    CHECK(ActiveIsa() == Isa::kScalar);
    CHECK(&Active() == &ScalarKernels());
    SetActiveIsa(before);
    CHECK(ActiveIsa() == before);
    CHECK(IsaName(Isa::kAvx2) == "avx2");
  }

  TEST_CASE("NormalizeInPlace") {
    std::vector<float> v{3.f, 4.f};
    CHECK(NormalizeInPlace(v) == doctest::Approx(5.f));
    CHECK(v[0] == doctest::Approx(0.6f));
    CHECK(v[1] == doctest::Approx(0.8f));
    std::vector<float> z{0.f, 0.f};
    CHECK(NormalizeInPlace(z) == 0.f);
    CHECK(z[0] == 0.f);
  }
}
