#include "grab/rerank/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "grab/error.hpp"
#include "grab/simd/kernels.hpp"

namespace grab::rerank {
namespace {

// Candidates ordered by (score desc, corpus order); the set semantics of the
// reranker rely on never looking at the caller's list order.
std::vector<std::size_t> CanonicalOrder(std::span<const index::SearchHit> candidates,
                                        const store::EmbeddingStore& store) {
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (candidates[a].score != candidates[b].score) return candidates[a].score > candidates[b].score;
    return store.tie_rank(candidates[a].row) < store.tie_rank(candidates[b].row);
  });
  return order;
}

}  // namespace

void RerankParams::Validate() const {
  if (expand_m < 1) throw Error(ErrorCode::kInvalidInput, "expand_m must be >= 1");
  if (!(p_limit_threshold >= 1.0)) throw Error(ErrorCode::kInvalidInput, "p_limit_threshold must be >= 1");
}

std::vector<float> GemPoolRaw(std::span<const std::span<const float>> vectors, double p,
                              double p_limit_threshold) {
  if (vectors.empty()) throw Error(ErrorCode::kInvalidInput, "GeM pooling needs at least one vector");
  if (!(p >= 1.0)) throw Error(ErrorCode::kInvalidInput, "GeM exponent must be >= 1");
  const std::size_t dim = vectors.front().size();
  for (const auto& v : vectors) {
    if (v.size() != dim) throw Error(ErrorCode::kDimensionMismatch, "GeM pooling over mixed dimensions");
  }
  const auto& k = simd::Active();
  std::vector<float> out(vectors.front().begin(), vectors.front().end());
  if (p >= p_limit_threshold) {
    for (std::size_t i = 1; i < vectors.size(); ++i) k.max_inplace(out.data(), vectors[i].data(), dim);
    return out;
  }
  const double n = static_cast<double>(vectors.size());
  if (p == 1.0) {
    for (std::size_t i = 1; i < vectors.size(); ++i) k.accumulate(out.data(), vectors[i].data(), dim);
    for (float& x : out) x = static_cast<float>(x / n);
    return out;
  }
  // Factor out the largest magnitude per component so |x|^p cannot underflow
  // for large p.
  for (std::size_t c = 0; c < dim; ++c) {
    double scale = 0.0;
    for (const auto& v : vectors) scale = std::max(scale, std::abs(static_cast<double>(v[c])));
    if (scale == 0.0) {
      out[c] = 0.f;
      continue;
    }
    double s = 0.0;
    for (const auto& v : vectors) {
      const double x = v[c] / scale;
      s += std::copysign(std::pow(std::abs(x), p), x);
    }
    s /= n;
    out[c] = static_cast<float>(scale * std::copysign(std::pow(std::abs(s), 1.0 / p), s));
  }
  return out;
}

std::vector<float> GemPool(std::span<const std::span<const float>> vectors, double p,
                           double p_limit_threshold) {
  auto out = GemPoolRaw(vectors, p, p_limit_threshold);
  simd::NormalizeInPlace(out);
  return out;
}

std::map<std::size_t, std::vector<float>> RefineDatabaseDescriptors(
    std::span<const index::SearchHit> candidates, const store::EmbeddingStore& store,
    const RerankParams& params) {
  std::map<std::size_t, std::vector<float>> refined;
  const std::size_t n = candidates.size();
  if (n == 0) return refined;
  const std::size_t dim = store.dim();

  // Pairwise candidate similarities, one dot_batch per candidate over a
  // packed copy of the candidate rows.
  std::vector<float> packed(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = store.row(candidates[i].row);
    std::copy(r.begin(), r.end(), packed.begin() + static_cast<std::ptrdiff_t>(i * dim));
  }
  std::vector<float> sims(n * n);
  const auto& k = simd::Active();
  for (std::size_t i = 0; i < n; ++i) {
    k.dot_batch(packed.data() + i * dim, packed.data(), n, dim, sims.data() + i * n);
  }

  const std::size_t neighbours = std::min(params.refine_k, n - 1);
  std::vector<std::size_t> others;
  std::vector<std::span<const float>> pool;
  for (std::size_t i = 0; i < n; ++i) {
    others.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) others.push_back(j);
    }
    const float* row_sims = sims.data() + i * n;
    const auto closer = [&](std::size_t a, std::size_t b) {
      if (row_sims[a] != row_sims[b]) return row_sims[a] > row_sims[b];
      return store.tie_rank(candidates[a].row) < store.tie_rank(candidates[b].row);
    };
    std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(neighbours),
                      others.end(), closer);
    pool.clear();
    pool.push_back(store.row(candidates[i].row));
    for (std::size_t t = 0; t < neighbours; ++t) pool.push_back(store.row(candidates[others[t]].row));
    refined[candidates[i].row] = GemPool(pool, 1.0, params.p_limit_threshold);
  }
  return refined;
}

std::vector<float> ExpandQuery(std::span<const float> unit_query,
                               std::span<const index::SearchHit> candidates,
                               const store::EmbeddingStore& store, const RerankParams& params) {
  params.Validate();
  const auto order = CanonicalOrder(candidates, store);
  std::vector<std::span<const float>> pool{unit_query};
  for (std::size_t t = 0; t < std::min(params.expand_m, order.size()); ++t) {
    pool.push_back(store.row(candidates[order[t]].row));
  }
  return GemPool(pool, kInfiniteP, params.p_limit_threshold);
}

std::vector<RerankedHit> Rerank(std::span<const float> query, std::span<const index::SearchHit> candidates,
                                const store::EmbeddingStore& store, const RerankParams& params) {
  params.Validate();
  const auto q = index::PrepareQuery(query, store.dim());
  const auto refined = RefineDatabaseDescriptors(candidates, store, params);
  const auto expanded = ExpandQuery(q, candidates, store, params);

  // raw ranks follow the canonical order, not the caller's list order
  const auto order = CanonicalOrder(candidates, store);
  std::vector<std::size_t> raw_rank(candidates.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) raw_rank[order[pos]] = pos + 1;

  std::vector<RerankedHit> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    RerankedHit h;
    h.hit = c;
    h.raw_rank = raw_rank[i];
    h.s1 = simd::Dot(q, refined.at(c.row));
    h.s2 = simd::Dot(expanded, store.row(c.row));
    h.s_final = (h.s1 + h.s2) / 2.0f;
    out.push_back(std::move(h));
  }
  std::sort(out.begin(), out.end(), [&](const RerankedHit& a, const RerankedHit& b) {
    if (a.s_final != b.s_final) return a.s_final > b.s_final;
    return store.tie_rank(a.hit.row) < store.tie_rank(b.hit.row);
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].hit.rank = i + 1;
  return out;
}

}  // namespace grab::rerank
