#include "grab/service/search_service.hpp"

#include <algorithm>
#include <cstdlib>

#include "grab/error.hpp"

namespace grab::service {
namespace {

std::optional<std::string> Env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

void ReplaceAll(std::string& s, std::string_view from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

ServiceConfig ServiceConfig::FromEnvironment() {
  ServiceConfig c;
  if (auto v = Env("GRAB_MANIFEST")) c.manifest = *v;
  if (auto v = Env("GRAB_INDEX_MODE")) c.index_mode = index::ParseIndexMode(*v);
  if (auto v = Env("GRAB_INDEX_FILE")) c.index_file = *v;
  if (auto v = Env("GRAB_EMBED_PROVIDER_URL")) c.provider_url = *v;
  if (auto v = Env("GRAB_ANNOTATION_LOG")) c.annotation_log = *v;
  if (auto v = Env("GRAB_LISTEN_ADDR")) c.listen_addr = *v;
  return c;
}

SearchService::SearchService(ServiceConfig config, std::shared_ptr<EmbeddingProvider> provider)
    : config_(std::move(config)), provider_(std::move(provider)) {
  if (!provider_ && !config_.provider_url.empty()) {
    provider_ = std::make_shared<HttpEmbeddingProvider>(config_.provider_url);
  }
  annotations_ = std::make_unique<AnnotationLog>(config_.annotation_log);
  snapshot_ = LoadSnapshot(1);
}

SearchService::SearchService(ServiceConfig config, std::shared_ptr<const store::EmbeddingStore> store,
                             std::shared_ptr<EmbeddingProvider> provider)
    : config_(std::move(config)), provider_(std::move(provider)), reloadable_(false) {
  if (!provider_ && !config_.provider_url.empty()) {
    provider_ = std::make_shared<HttpEmbeddingProvider>(config_.provider_url);
  }
  annotations_ = std::make_unique<AnnotationLog>(config_.annotation_log);
  auto snap = std::make_shared<Snapshot>();
  snap->manifest.dim = static_cast<int>(store->dim());
  snap->store = std::move(store);
  if (!snap->store->empty()) {
    snap->index = std::make_shared<index::AnnIndex>(index::AnnIndex::Build(snap->store, config_.index_mode, config_.graph));
  }
  snap->generation = 1;
  snapshot_ = std::move(snap);
}

std::shared_ptr<const Snapshot> SearchService::LoadSnapshot(std::uint64_t generation) const {
  if (config_.manifest.empty()) throw Error(ErrorCode::kInvalidInput, "no manifest configured (GRAB_MANIFEST)");
  auto snap = std::make_shared<Snapshot>();
  snap->manifest = store::LoadManifest(config_.manifest);
  snap->store = store::EmbeddingStore::Load(snap->manifest);
  snap->generation = generation;
  if (!snap->store->empty()) {
    std::optional<index::AnnIndex> idx;
    if (config_.index_file && std::filesystem::exists(*config_.index_file)) {
      try {
        auto loaded = index::AnnIndex::Load(*config_.index_file, snap->store);
        if (loaded.mode() == config_.index_mode) idx.emplace(std::move(loaded));
      } catch (const Error&) {
        // stale or foreign index file: rebuild below
      }
    }
    if (!idx) idx.emplace(index::AnnIndex::Build(snap->store, config_.index_mode, config_.graph));
    snap->index = std::make_shared<index::AnnIndex>(std::move(*idx));
  }
  return snap;
}

std::shared_ptr<const Snapshot> SearchService::snapshot() const {
  std::lock_guard lock(mu_);
  return snapshot_;
}

std::shared_ptr<const Snapshot> SearchService::Reload() {
  if (!reloadable_) throw Error(ErrorCode::kCapability, "this service was started without a manifest");
  const auto current = snapshot();
  // Build outside the lock so searches continue against the old snapshot.
  auto next = LoadSnapshot(current->generation + 1);
  std::lock_guard lock(mu_);
  snapshot_ = next;
  return next;
}

std::vector<float> SearchService::EmbedText(const std::string& text, std::size_t dim) {
  if (!provider_) throw Error(ErrorCode::kProviderUnavailable, "no embedding provider configured for text queries");
  return provider_->Embed(text, dim);
}

SearchOutcome SearchService::Search(const Snapshot& snap, std::span<const float> query, std::size_t top_k,
                                    bool do_rerank, const rerank::RerankParams& params) const {
  if (top_k < 1 || top_k > 500) throw Error(ErrorCode::kInvalidInput, "top_k must be in [1, 500]");
  if (query.size() != snap.store->dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "query has dimension " + std::to_string(query.size()) +
                                                   ", corpus dimension is " + std::to_string(snap.store->dim()));
  }
  SearchOutcome out;
  out.reranked = do_rerank;
  if (!snap.index) {
    index::PrepareQuery(query, snap.store->dim());  // still reject zero / non-finite queries
    return out;
  }
  if (!do_rerank) {
    for (auto& h : snap.index->Search(query, top_k)) {
      rerank::RerankedHit r;
      r.raw_rank = h.rank;
      r.hit = std::move(h);
      out.hits.push_back(std::move(r));
    }
    out.candidates = out.hits.size();
    return out;
  }
  params.Validate();
  const auto candidates = snap.index->Search(query, std::max(config_.candidate_pool, top_k));
  out.candidates = candidates.size();
  out.hits = rerank::Rerank(query, candidates, *snap.store, params);
  if (out.hits.size() > top_k) out.hits.resize(top_k);
  return out;
}

temporal::MomentResult SearchService::Temporal(const Snapshot& snap, std::span<const float> q_start,
                                               std::span<const float> q_end, const temporal::PivotRef& pivot,
                                               const temporal::AbtsParams& params) const {
  const auto& video = snap.store->GetVideo(pivot.video_id);
  if (pivot.frame_index < 0 || pivot.frame_index >= video.frame_count) {
    throw Error(ErrorCode::kNotFound, "pivot frame " + std::to_string(pivot.frame_index) +
                                          " not in video '" + pivot.video_id + "' (0.." +
                                          std::to_string(video.frame_count - 1) + ")");
  }
  return temporal::TemporalSearch(q_start, q_end, pivot, *snap.store, params);
}

std::vector<NeighborFrame> SearchService::Neighbors(const Snapshot& snap, const std::string& video_id,
                                                    std::int64_t frame, std::int64_t span) const {
  const auto& video = snap.store->GetVideo(video_id);
  if (span < 0) throw Error(ErrorCode::kInvalidInput, "span must be >= 0");
  if (frame < 0 || frame >= video.frame_count) {
    throw Error(ErrorCode::kNotFound, "frame " + std::to_string(frame) + " not in video '" + video_id + "'");
  }
  auto grid = store::EmbeddingStore::GridFrames(video, static_cast<double>(frame - span),
                                                static_cast<double>(frame + span));
  if (grid.empty()) grid.push_back(store::EmbeddingStore::NearestGridFrame(video, frame));
  std::vector<NeighborFrame> out;
  out.reserve(grid.size());
  for (auto f : grid) out.push_back({f, video.Timestamp(f), snap.store->FindRow(video_id, f).has_value()});
  return out;
}

std::optional<std::filesystem::path> SearchService::ThumbnailPath(const Snapshot& snap, const std::string& video_id,
                                                                  std::int64_t frame) const {
  if (!snap.manifest.thumbnail_template) return std::nullopt;
  if (!snap.store->FindRow(video_id, frame)) return std::nullopt;
  std::string rel = *snap.manifest.thumbnail_template;
  ReplaceAll(rel, "{video_id}", video_id);
  ReplaceAll(rel, "{frame_index}", std::to_string(frame));
  return snap.manifest.Resolve(rel);
}

}  // namespace grab::service
