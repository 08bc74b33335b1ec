#include "proximity_graph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <queue>

#include "grab/error.hpp"
#include "grab/simd/kernels.hpp"

namespace grab::index {
namespace {

template <typename T>
void Put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T Get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(ErrorCode::kFormat, "truncated index graph payload");
  return value;
}

struct WorstFirst {
  bool operator()(const AnnIndex::Graph::Scored& a, const AnnIndex::Graph::Scored& b) const {
    return a.first > b.first;
  }
};

struct BestFirst {
  bool operator()(const AnnIndex::Graph::Scored& a, const AnnIndex::Graph::Scored& b) const {
    return a.first < b.first;
  }
};

}  // namespace

AnnIndex::Graph::Graph(const float* data, std::size_t rows, std::size_t dim, GraphParams params)
    : data_(data), rows_(rows), dim_(dim), params_(params) {
  if (params_.max_degree < 2) throw Error(ErrorCode::kBuild, "graph max_degree must be >= 2");
  if (params_.construction_beam < 1 || params_.query_beam < 1) {
    throw Error(ErrorCode::kBuild, "graph beams must be >= 1");
  }
}

float AnnIndex::Graph::Similarity(const float* q, std::uint32_t node) const {
  return simd::Active().dot(q, data_ + static_cast<std::size_t>(node) * dim_, dim_);
}

std::vector<AnnIndex::Graph::Scored> AnnIndex::Graph::SearchLayer(
    const float* q, const std::vector<Scored>& entry, std::size_t ef, int level,
    std::vector<std::uint32_t>& visited, std::uint32_t& epoch) const {
  if (++epoch == 0) {
    std::fill(visited.begin(), visited.end(), 0);
    epoch = 1;
  }
  std::priority_queue<Scored, std::vector<Scored>, BestFirst> frontier;
  std::priority_queue<Scored, std::vector<Scored>, WorstFirst> best;
  for (const auto& e : entry) {
    visited[e.second] = epoch;
    frontier.push(e);
    best.push(e);
  }
  while (best.size() > ef) best.pop();

  while (!frontier.empty()) {
    const Scored current = frontier.top();
    if (best.size() >= ef && current.first < best.top().first) break;
    frontier.pop();
    for (std::uint32_t nb : links_[current.second][static_cast<std::size_t>(level)]) {
      if (visited[nb] == epoch) continue;
      visited[nb] = epoch;
      const float sim = Similarity(q, nb);
      if (best.size() < ef || sim > best.top().first) {
        frontier.emplace(sim, nb);
        best.emplace(sim, nb);
        if (best.size() > ef) best.pop();
      }
    }
  }
  std::vector<Scored> out;
  out.reserve(best.size());
  while (!best.empty()) {
    out.push_back(best.top());
    best.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::uint32_t> AnnIndex::Graph::SelectNeighbors(const std::vector<Scored>& candidates,
                                                            std::size_t max_links) const {
  std::vector<std::uint32_t> kept;
  kept.reserve(max_links);
  for (const auto& [sim_to_base, node] : candidates) {
    if (kept.size() >= max_links) break;
    const float* v = data_ + static_cast<std::size_t>(node) * dim_;
    bool diverse = true;
    for (std::uint32_t k : kept) {
      if (Similarity(v, k) > sim_to_base) {
        diverse = false;
        break;
      }
    }
    if (diverse) kept.push_back(node);
  }
  return kept;
}

void AnnIndex::Graph::Insert(std::uint32_t node, int level) {
  links_[node].resize(static_cast<std::size_t>(level) + 1);
  if (max_level_ < 0) {
    entry_ = node;
    max_level_ = level;
    return;
  }
  const float* q = data_ + static_cast<std::size_t>(node) * dim_;
  std::vector<Scored> entry{{Similarity(q, entry_), entry_}};
  for (int l = max_level_; l > level; --l) {
    entry = SearchLayer(q, entry, 1, l, build_visited_, build_epoch_);
  }
  for (int l = std::min(level, max_level_); l >= 0; --l) {
    auto candidates = SearchLayer(q, entry, params_.construction_beam, l, build_visited_, build_epoch_);
    const std::size_t max_links = MaxLinks(l);
    auto& own = links_[node][static_cast<std::size_t>(l)];
    own = SelectNeighbors(candidates, params_.max_degree);
    for (std::uint32_t nb : own) {
      auto& back = links_[nb][static_cast<std::size_t>(l)];
      back.push_back(node);
      if (back.size() > max_links) {
        const float* nv = data_ + static_cast<std::size_t>(nb) * dim_;
        std::vector<Scored> scored;
        scored.reserve(back.size());
        for (std::uint32_t x : back) scored.emplace_back(Similarity(nv, x), x);
        std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
          return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        back = SelectNeighbors(scored, max_links);
      }
    }
    entry = std::move(candidates);
  }
  if (level > max_level_) {
    max_level_ = level;
    entry_ = node;
  }
}

void AnnIndex::Graph::Build() {
  links_.assign(rows_, {});
  build_visited_.assign(rows_, 0);
  build_epoch_ = 0;
  max_level_ = -1;
  std::mt19937_64 rng(params_.seed);
  const double level_mult = 1.0 / std::log(static_cast<double>(params_.max_degree));
  for (std::size_t i = 0; i < rows_; ++i) {
    // uniform in (0, 1] from the top 53 bits
    const double u = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
    const int level = static_cast<int>(std::floor(-std::log(u) * level_mult));
    Insert(static_cast<std::uint32_t>(i), level);
  }
  build_visited_.clear();
  build_visited_.shrink_to_fit();
}

std::vector<AnnIndex::Graph::Scored> AnnIndex::Graph::Search(const float* query, std::size_t k,
                                                             std::size_t ef) const {
  if (max_level_ < 0) return {};
  std::vector<std::uint32_t> visited(rows_, 0);
  std::uint32_t epoch = 0;
  std::vector<Scored> entry{{Similarity(query, entry_), entry_}};
  for (int l = max_level_; l > 0; --l) entry = SearchLayer(query, entry, 1, l, visited, epoch);
  auto found = SearchLayer(query, entry, std::max(ef, k), 0, visited, epoch);
  if (found.size() > k) found.resize(k);
  return found;
}

void AnnIndex::Graph::Serialize(std::ostream& out) const {
  Put<std::uint32_t>(out, entry_);
  Put<std::int32_t>(out, max_level_);
  for (const auto& node_links : links_) {
    Put<std::uint32_t>(out, static_cast<std::uint32_t>(node_links.size()));
    for (const auto& level_links : node_links) {
      Put<std::uint32_t>(out, static_cast<std::uint32_t>(level_links.size()));
      out.write(reinterpret_cast<const char*>(level_links.data()),
                static_cast<std::streamsize>(level_links.size() * sizeof(std::uint32_t)));
    }
  }
}

std::unique_ptr<AnnIndex::Graph> AnnIndex::Graph::Deserialize(std::istream& in, const float* data,
                                                              std::size_t rows, std::size_t dim,
                                                              GraphParams params) {
  auto g = std::make_unique<Graph>(data, rows, dim, params);
  g->entry_ = Get<std::uint32_t>(in);
  g->max_level_ = Get<std::int32_t>(in);
  if (rows > 0 && (g->entry_ >= rows || g->max_level_ < 0)) {
    throw Error(ErrorCode::kFormat, "corrupt index graph header");
  }
  g->links_.resize(rows);
  for (auto& node_links : g->links_) {
    const auto levels = Get<std::uint32_t>(in);
    if (levels == 0 || static_cast<int>(levels) > g->max_level_ + 1) {
      throw Error(ErrorCode::kFormat, "corrupt index graph level count");
    }
    node_links.resize(levels);
    for (auto& level_links : node_links) {
      const auto n = Get<std::uint32_t>(in);
      if (n > 2 * params.max_degree) throw Error(ErrorCode::kFormat, "corrupt index graph degree");
      level_links.resize(n);
      in.read(reinterpret_cast<char*>(level_links.data()), static_cast<std::streamsize>(n * sizeof(std::uint32_t)));
      if (!in) throw Error(ErrorCode::kFormat, "truncated index graph payload");
      for (std::uint32_t x : level_links) {
        if (x >= rows) throw Error(ErrorCode::kFormat, "index graph link out of range");
      }
    }
  }
  for (const auto& node_links : g->links_) {
    for (std::size_t l = 0; l < node_links.size(); ++l) {
      for (std::uint32_t x : node_links[l]) {
        if (g->links_[x].size() <= l) throw Error(ErrorCode::kFormat, "index graph link to missing layer");
      }
    }
  }
  return g;
}

}  // namespace grab::index
