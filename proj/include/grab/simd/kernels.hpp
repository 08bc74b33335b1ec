#pragma once

// Data-parallel inner loops used by the store, index, rerank and temporal
// modules. Every kernel has a scalar reference implementation; AVX2+FMA (x86)
// and NEON (aarch64) variants are selected once at runtime and must agree with
// the reference up to float reassociation error.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace grab::simd {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view IsaName(Isa isa);

struct KernelTable {
  float (*dot)(const float* a, const float* b, std::size_t n);
  // out[r] = <query, rows[r*dim .. r*dim+dim)> for r in [0, nrows).
  void (*dot_batch)(const float* query, const float* rows, std::size_t nrows,
                    std::size_t dim, float* out);
  // acc[i] += x[i]
  void (*accumulate)(float* acc, const float* x, std::size_t n);
  // acc[i] = max(acc[i], x[i])
  void (*max_inplace)(float* acc, const float* x, std::size_t n);
  // out[i] = popcount(query ^ hashes[i])
  void (*hamming_batch)(std::uint64_t query, const std::uint64_t* hashes,
                        std::size_t n, std::uint32_t* out);
};

// Per-ISA tables. Only ISAs compiled into this binary and supported by the
// running CPU are returned; others yield nullptr.
const KernelTable& ScalarKernels();
const KernelTable* Avx2Kernels();
const KernelTable* NeonKernels();

// Best ISA available on this machine. GRAB_SIMD=scalar|avx2|neon in the
// environment restricts the choice (unsupported requests fall back to scalar).
Isa DetectIsa();

// Active table; selected on first use, overridable for tests.
const KernelTable& Active();
Isa ActiveIsa();
bool SetActiveIsa(Isa isa);  // false if not available on this CPU

inline float Dot(std::span<const float> a, std::span<const float> b) {
  return Active().dot(a.data(), b.data(), a.size());
}

// Scales v to unit length in place; returns the original norm.
float NormalizeInPlace(std::span<float> v);

}  // namespace grab::simd
