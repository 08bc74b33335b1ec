// aarch64 only; the build adds this file when the target has NEON.

#include <arm_neon.h>

#include <bit>

#include "grab/simd/kernels.hpp"

namespace grab::simd {
namespace {

float DotNeon(const float* a, const float* b, std::size_t n) {
  float32x4_t acc0 = vdupq_n_f32(0.f);
  float32x4_t acc1 = vdupq_n_f32(0.f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
    acc1 = vfmaq_f32(acc1, vld1q_f32(a + i + 4), vld1q_f32(b + i + 4));
  }
  if (i + 4 <= n) {
    acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
    i += 4;
  }
  float sum = vaddvq_f32(vaddq_f32(acc0, acc1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void DotBatchNeon(const float* query, const float* rows, std::size_t nrows, std::size_t dim,
                  float* out) {
  for (std::size_t r = 0; r < nrows; ++r) out[r] = DotNeon(query, rows + r * dim, dim);
}

void AccumulateNeon(float* acc, const float* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(acc + i, vaddq_f32(vld1q_f32(acc + i), vld1q_f32(x + i)));
  for (; i < n; ++i) acc[i] += x[i];
}

void MaxInplaceNeon(float* acc, const float* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(acc + i, vmaxq_f32(vld1q_f32(acc + i), vld1q_f32(x + i)));
  for (; i < n; ++i) acc[i] = acc[i] < x[i] ? x[i] : acc[i];
}

void HammingBatchNeon(std::uint64_t query, const std::uint64_t* hashes, std::size_t n,
                      std::uint32_t* out) {
  const uint64x2_t q = vdupq_n_u64(query);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const uint8x16_t x = vreinterpretq_u8_u64(veorq_u64(vld1q_u64(hashes + i), q));
    const uint64x2_t c = vpaddlq_u32(vpaddlq_u16(vpaddlq_u8(vcntq_u8(x))));
    out[i] = static_cast<std::uint32_t>(vgetq_lane_u64(c, 0));
    out[i + 1] = static_cast<std::uint32_t>(vgetq_lane_u64(c, 1));
  }
  for (; i < n; ++i) out[i] = static_cast<std::uint32_t>(std::popcount(query ^ hashes[i]));
}

}  // namespace

const KernelTable& NeonKernelTable() {
  static const KernelTable table{DotNeon, DotBatchNeon, AccumulateNeon, MaxInplaceNeon,
                                 HammingBatchNeon};
  return table;
}

}  // namespace grab::simd
