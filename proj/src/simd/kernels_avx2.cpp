// Compiled with -mavx2 -mfma. Nothing in this file may run before
// DetectIsa() has confirmed CPU support.

#include <immintrin.h>

#include <bit>

#include "grab/simd/kernels.hpp"

namespace grab::simd {
namespace {

inline float HorizontalSum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

float DotAvx2(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  if (i + 8 <= n) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    i += 8;
  }
  float sum = HorizontalSum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void DotBatchAvx2(const float* query, const float* rows, std::size_t nrows, std::size_t dim,
                  float* out) {
  std::size_t r = 0;
  // 4 rows per pass share each query load.
  for (; r + 4 <= nrows; r += 4) {
    const float* r0 = rows + r * dim;
    const float* r1 = r0 + dim;
    const float* r2 = r1 + dim;
    const float* r3 = r2 + dim;
    __m256 a0 = _mm256_setzero_ps(), a1 = _mm256_setzero_ps();
    __m256 a2 = _mm256_setzero_ps(), a3 = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= dim; i += 8) {
      const __m256 q = _mm256_loadu_ps(query + i);
      a0 = _mm256_fmadd_ps(q, _mm256_loadu_ps(r0 + i), a0);
      a1 = _mm256_fmadd_ps(q, _mm256_loadu_ps(r1 + i), a1);
      a2 = _mm256_fmadd_ps(q, _mm256_loadu_ps(r2 + i), a2);
      a3 = _mm256_fmadd_ps(q, _mm256_loadu_ps(r3 + i), a3);
    }
    float s0 = HorizontalSum(a0), s1 = HorizontalSum(a1);
    float s2 = HorizontalSum(a2), s3 = HorizontalSum(a3);
    for (; i < dim; ++i) {
      s0 += query[i] * r0[i];
      s1 += query[i] * r1[i];
      s2 += query[i] * r2[i];
      s3 += query[i] * r3[i];
    }
    out[r] = s0;
    out[r + 1] = s1;
    out[r + 2] = s2;
    out[r + 3] = s3;
  }
  for (; r < nrows; ++r) out[r] = DotAvx2(query, rows + r * dim, dim);
}

void AccumulateAvx2(float* acc, const float* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(acc + i, _mm256_add_ps(_mm256_loadu_ps(acc + i), _mm256_loadu_ps(x + i)));
  for (; i < n; ++i) acc[i] += x[i];
}

void MaxInplaceAvx2(float* acc, const float* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(acc + i, _mm256_max_ps(_mm256_loadu_ps(acc + i), _mm256_loadu_ps(x + i)));
  for (; i < n; ++i) acc[i] = acc[i] < x[i] ? x[i] : acc[i];
}

// Nibble-LUT popcount (vpshufb) summed per 64-bit lane with vpsadbw.
void HammingBatchAvx2(std::uint64_t query, const std::uint64_t* hashes, std::size_t n,
                      std::uint32_t* out) {
  const __m256i lut = _mm256_setr_epi8(0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4,
                                       0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4);
  const __m256i low_mask = _mm256_set1_epi8(0x0f);
  const __m256i q = _mm256_set1_epi64x(static_cast<long long>(query));
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256i x = _mm256_xor_si256(
        _mm256_loadu_si256(reinterpret_cast<const __m256i*>(hashes + i)), q);
    const __m256i lo = _mm256_shuffle_epi8(lut, _mm256_and_si256(x, low_mask));
    const __m256i hi = _mm256_shuffle_epi8(lut, _mm256_and_si256(_mm256_srli_epi16(x, 4), low_mask));
    const __m256i counts = _mm256_sad_epu8(_mm256_add_epi8(lo, hi), _mm256_setzero_si256());
    alignas(32) std::uint64_t lanes[4];
    _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), counts);
    for (int k = 0; k < 4; ++k) out[i + k] = static_cast<std::uint32_t>(lanes[k]);
  }
  for (; i < n; ++i) out[i] = static_cast<std::uint32_t>(std::popcount(query ^ hashes[i]));
}

}  // namespace

const KernelTable& Avx2KernelTable() {
  static const KernelTable table{DotAvx2, DotBatchAvx2, AccumulateAvx2, MaxInplaceAvx2,
                                 HammingBatchAvx2};
  return table;
}

}  // namespace grab::simd
