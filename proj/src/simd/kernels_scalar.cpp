#include <algorithm>
#include <bit>

#include "grab/simd/kernels.hpp"

namespace grab::simd {
namespace {

float DotScalar(const float* a, const float* b, std::size_t n) {
  // four accumulators; reassociation differs from the vector kernels
  float s0 = 0.f, s1 = 0.f, s2 = 0.f, s3 = 0.f;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

void DotBatchScalar(const float* query, const float* rows, std::size_t nrows,
                    std::size_t dim, float* out) {
  for (std::size_t r = 0; r < nrows; ++r) out[r] = DotScalar(query, rows + r * dim, dim);
}

void AccumulateScalar(float* acc, const float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += x[i];
}

void MaxInplaceScalar(float* acc, const float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] = std::max(acc[i], x[i]);
}

void HammingBatchScalar(std::uint64_t query, const std::uint64_t* hashes, std::size_t n,
                        std::uint32_t* out) {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = static_cast<std::uint32_t>(std::popcount(query ^ hashes[i]));
}

}  // namespace

const KernelTable& ScalarKernels() {
  static const KernelTable table{DotScalar, DotBatchScalar, AccumulateScalar,
                                 MaxInplaceScalar, HammingBatchScalar};
  return table;
}

}  // namespace grab::simd
