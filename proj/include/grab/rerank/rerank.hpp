#pragma once

// Global-descriptor reranking of a top-M candidate list: candidate
// descriptors are refined by average pooling over their nearest neighbours
// in the candidate set, the query is expanded by max pooling with the top
// hits, and the two similarity channels are averaged.

#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "grab/index/ann_index.hpp"
#include "grab/store/embedding_store.hpp"

namespace grab::rerank {

inline constexpr double kInfiniteP = std::numeric_limits<double>::infinity();

struct RerankParams {
  std::size_t refine_k = 10;  // neighbours pooled into each refined descriptor; 0 = self only
  std::size_t expand_m = 5;   // top hits max-pooled into the expanded query, >= 1
  double p_limit_threshold = 1000.0;  // p at or above this pools as elementwise max

  void Validate() const;
};

struct RerankedHit {
  index::SearchHit hit;     // score is the raw similarity, rank the final rank
  std::size_t raw_rank = 0;  // rank before reranking
  float s1 = 0.f;           // cos(query, refined candidate)
  float s2 = 0.f;           // cos(expanded query, original candidate)
  float s_final = 0.f;      // (s1 + s2) / 2
};

// Generalized mean over equal-length vectors, not normalized. p = 1 is the
// arithmetic mean; p >= p_limit_threshold (or infinite) is the elementwise
// max; other finite p > 1 use the sign-preserving power mean
// sign(S) * |S|^(1/p) with S = mean(sign(x) * |x|^p).
std::vector<float> GemPoolRaw(std::span<const std::span<const float>> vectors, double p,
                              double p_limit_threshold = 1000.0);
// GemPoolRaw followed by L2 normalization.
std::vector<float> GemPool(std::span<const std::span<const float>> vectors, double p,
                           double p_limit_threshold = 1000.0);

// row -> unit-length refined descriptor (p = 1 over self + refine_k nearest
// candidates by cosine, ties by corpus order).
std::map<std::size_t, std::vector<float>> RefineDatabaseDescriptors(
    std::span<const index::SearchHit> candidates, const store::EmbeddingStore& store,
    const RerankParams& params);

// Max pool of the query and the expand_m best candidates by initial score.
std::vector<float> ExpandQuery(std::span<const float> unit_query,
                               std::span<const index::SearchHit> candidates,
                               const store::EmbeddingStore& store, const RerankParams& params);

// Reorders the candidate list by s_final (ties by corpus order). The output is
// a permutation of the input.
std::vector<RerankedHit> Rerank(std::span<const float> query, std::span<const index::SearchHit> candidates,
                                const store::EmbeddingStore& store, const RerankParams& params);

}  // namespace grab::rerank
