#pragma once

// Hierarchical navigable small-world graph over unit vectors, scored by inner
// product (= cosine). Private to the index module.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <random>
#include <utility>
#include <vector>

#include "grab/index/ann_index.hpp"

namespace grab::index {

class AnnIndex::Graph {
 public:
  using Scored = std::pair<float, std::uint32_t>;  // (similarity, node)

  Graph(const float* data, std::size_t rows, std::size_t dim, GraphParams params);

  void Build();
  // Best `k` nodes by similarity, descending, exploring with beam `ef`.
  std::vector<Scored> Search(const float* query, std::size_t k, std::size_t ef) const;

  void Serialize(std::ostream& out) const;
  static std::unique_ptr<Graph> Deserialize(std::istream& in, const float* data, std::size_t rows,
                                            std::size_t dim, GraphParams params);

  std::size_t size() const { return rows_; }
  int max_level() const { return max_level_; }
  const std::vector<std::uint32_t>& Links(std::uint32_t node, int level) const {
    return links_[node][static_cast<std::size_t>(level)];
  }

 private:
  float Similarity(const float* q, std::uint32_t node) const;
  std::size_t MaxLinks(int level) const {
    return level == 0 ? 2 * params_.max_degree : params_.max_degree;
  }
  // Beam search on one layer; result sorted by similarity descending.
  std::vector<Scored> SearchLayer(const float* q, const std::vector<Scored>& entry, std::size_t ef,
                                  int level, std::vector<std::uint32_t>& visited,
                                  std::uint32_t& epoch) const;
  // Diversity heuristic: keep a candidate only if it is closer to the base
  // than to every neighbor already kept.
  std::vector<std::uint32_t> SelectNeighbors(const std::vector<Scored>& candidates,
                                             std::size_t max_links) const;
  void Insert(std::uint32_t node, int level);

  const float* data_;
  std::size_t rows_;
  std::size_t dim_;
  GraphParams params_;
  std::vector<std::vector<std::vector<std::uint32_t>>> links_;  // [node][level]
  std::uint32_t entry_ = 0;
  int max_level_ = -1;

  std::vector<std::uint32_t> build_visited_;
  std::uint32_t build_epoch_ = 0;
};

}  // namespace grab::index
