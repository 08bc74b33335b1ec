#include "grab/index/ann_index.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "grab/error.hpp"
#include "grab/simd/kernels.hpp"
#include "proximity_graph.hpp"

namespace grab::index {
namespace {

static_assert(std::endian::native == std::endian::little,
              "index files are written in little-endian host order");

constexpr std::array<char, 8> kMagic{'G', 'R', 'A', 'B', 'I', 'D', 'X', '1'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void Put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T Get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(ErrorCode::kFormat, "truncated index header");
  return value;
}

SearchHit MakeHit(const store::EmbeddingStore& store, std::size_t row, float score) {
  return SearchHit{store.row_video_id(row), store.row_info(row).frame_index, row, score, 0};
}

}  // namespace

std::string_view IndexModeName(IndexMode mode) {
  return mode == IndexMode::kExact ? "exact" : "approx";
}

IndexMode ParseIndexMode(std::string_view name) {
  if (name == "exact") return IndexMode::kExact;
  if (name == "approx" || name == "approximate") return IndexMode::kApproximate;
  throw Error(ErrorCode::kInvalidInput, "unknown index mode '" + std::string(name) + "'");
}

std::vector<float> PrepareQuery(std::span<const float> query, std::size_t dim) {
  if (query.size() != dim) {
    throw Error(ErrorCode::kDimensionMismatch, "query dimension " + std::to_string(query.size()) +
                                                   " != corpus dimension " + std::to_string(dim));
  }
  std::vector<float> q(query.begin(), query.end());
  for (float x : q) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kInvalidInput, "query has non-finite components");
  }
  if (simd::NormalizeInPlace(q) == 0.0f) throw Error(ErrorCode::kInvalidInput, "query vector is zero");
  return q;
}

void SortHits(std::vector<SearchHit>& hits, const store::EmbeddingStore& store) {
  std::sort(hits.begin(), hits.end(), [&](const SearchHit& a, const SearchHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return store.tie_rank(a.row) < store.tie_rank(b.row);
  });
  for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = i + 1;
}

std::vector<SearchHit> ExactSearch(const store::EmbeddingStore& store, std::span<const float> unit_query,
                                   std::size_t top_m) {
  const std::size_t n = store.rows();
  std::vector<float> scores(n);
  simd::Active().dot_batch(unit_query.data(), store.matrix().data(), n, store.dim(), scores.data());
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  const auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return store.tie_rank(a) < store.tie_rank(b);
  };
  const std::size_t m = std::min(top_m, n);
  if (m < n) {
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(), better);
    order.resize(m);
  }
  std::sort(order.begin(), order.end(), better);
  std::vector<SearchHit> hits;
  hits.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    hits.push_back(MakeHit(store, order[i], scores[order[i]]));
    hits.back().rank = i + 1;
  }
  return hits;
}

AnnIndex::AnnIndex(std::shared_ptr<const store::EmbeddingStore> store, IndexMode mode, GraphParams params)
    : store_(std::move(store)), mode_(mode), params_(params) {}

AnnIndex::AnnIndex(AnnIndex&&) noexcept = default;
AnnIndex& AnnIndex::operator=(AnnIndex&&) noexcept = default;
AnnIndex::~AnnIndex() = default;

AnnIndex AnnIndex::Build(std::shared_ptr<const store::EmbeddingStore> store, IndexMode mode,
                         GraphParams params) {
  if (!store || store->empty()) throw Error(ErrorCode::kBuild, "cannot build an index over an empty store");
  AnnIndex index(std::move(store), mode, params);
  if (mode == IndexMode::kApproximate) {
    const auto& s = *index.store_;
    index.graph_ = std::make_unique<Graph>(s.matrix().data(), s.rows(), s.dim(), params);
    index.graph_->Build();
  }
  return index;
}

std::size_t AnnIndex::size() const { return store_->rows(); }
std::size_t AnnIndex::dim() const { return store_->dim(); }

std::vector<SearchHit> AnnIndex::Search(std::span<const float> query, std::size_t top_m) const {
  if (top_m < 1) throw Error(ErrorCode::kInvalidInput, "top-M must be >= 1");
  const auto q = PrepareQuery(query, store_->dim());
  if (mode_ == IndexMode::kExact) return ExactSearch(*store_, q, top_m);

  const auto found = graph_->Search(q.data(), top_m, params_.query_beam);
  std::vector<SearchHit> hits;
  hits.reserve(found.size());
  for (const auto& [sim, node] : found) hits.push_back(MakeHit(*store_, node, sim));
  SortHits(hits, *store_);
  return hits;
}

void AnnIndex::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write index " + path.string());
  out.write(kMagic.data(), kMagic.size());
  Put<std::uint32_t>(out, kFormatVersion);
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(mode_));
  Put<std::uint64_t>(out, store_->rows());
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(store_->dim()));
  Put<std::uint32_t>(out, 0);
  Put<std::uint64_t>(out, store_->Fingerprint());
  if (mode_ == IndexMode::kApproximate) {
    Put<std::uint32_t>(out, params_.max_degree);
    Put<std::uint32_t>(out, params_.construction_beam);
    Put<std::uint32_t>(out, params_.query_beam);
    Put<std::uint32_t>(out, 0);
    Put<std::uint64_t>(out, params_.seed);
    graph_->Serialize(out);
  }
  const auto m = store_->matrix();
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size_bytes()));
  if (!out) throw Error(ErrorCode::kIo, "short write on index " + path.string());
}

AnnIndex AnnIndex::Load(const std::filesystem::path& path,
                        std::shared_ptr<const store::EmbeddingStore> store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open index " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw Error(ErrorCode::kFormat, path.string() + ": not a GRABIDX1 index file");
  const auto version = Get<std::uint32_t>(in);
  if (version != kFormatVersion) {
    throw Error(ErrorCode::kFormat, path.string() + ": index format version " + std::to_string(version) +
                                        " unsupported (expected " + std::to_string(kFormatVersion) + ")");
  }
  const auto mode_raw = Get<std::uint32_t>(in);
  if (mode_raw > 1) throw Error(ErrorCode::kFormat, "unknown index mode tag");
  const auto mode = static_cast<IndexMode>(mode_raw);
  const auto rows = Get<std::uint64_t>(in);
  const auto dim = Get<std::uint32_t>(in);
  Get<std::uint32_t>(in);
  const auto fingerprint = Get<std::uint64_t>(in);
  if (!store || rows != store->rows() || dim != store->dim() || fingerprint != store->Fingerprint()) {
    throw Error(ErrorCode::kFormat, path.string() + ": index was built from a different corpus");
  }
  GraphParams params;
  std::unique_ptr<Graph> graph;
  if (mode == IndexMode::kApproximate) {
    params.max_degree = Get<std::uint32_t>(in);
    params.construction_beam = Get<std::uint32_t>(in);
    params.query_beam = Get<std::uint32_t>(in);
    Get<std::uint32_t>(in);
    params.seed = Get<std::uint64_t>(in);
    graph = Graph::Deserialize(in, store->matrix().data(), store->rows(), store->dim(), params);
  }
  // The stored matrix must match the corpus bit for bit.
  std::vector<float> matrix(static_cast<std::size_t>(rows) * dim);
  in.read(reinterpret_cast<char*>(matrix.data()), static_cast<std::streamsize>(matrix.size() * 4));
  if (!in) throw Error(ErrorCode::kFormat, path.string() + ": truncated vector payload");
  if (std::memcmp(matrix.data(), store->matrix().data(), matrix.size() * 4) != 0) {
    throw Error(ErrorCode::kFormat, path.string() + ": vector payload differs from corpus");
  }
  AnnIndex index(std::move(store), mode, params);
  index.graph_ = std::move(graph);
  return index;
}

}  // namespace grab::index
