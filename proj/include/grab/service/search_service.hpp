#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "grab/index/ann_index.hpp"
#include "grab/rerank/rerank.hpp"
#include "grab/service/annotation_log.hpp"
#include "grab/service/embedding_provider.hpp"
#include "grab/store/embedding_store.hpp"
#include "grab/temporal/abts.hpp"

namespace grab::service {

struct ServiceConfig {
  std::filesystem::path manifest;
  index::IndexMode index_mode = index::IndexMode::kExact;
  std::optional<std::filesystem::path> index_file;  // prebuilt index; rebuilt if stale
  index::GraphParams graph;
  std::string provider_url;                         // empty: text queries unavailable
  std::filesystem::path annotation_log = "annotations.jsonl";
  std::string listen_addr = "127.0.0.1:8080";
  std::size_t candidate_pool = 100;                 // top-M fed to reranking

  // GRAB_MANIFEST, GRAB_INDEX_MODE, GRAB_INDEX_FILE, GRAB_EMBED_PROVIDER_URL,
  // GRAB_ANNOTATION_LOG, GRAB_LISTEN_ADDR override the defaults.
  static ServiceConfig FromEnvironment();
};

// Immutable corpus state; requests hold a shared_ptr for their duration.
struct Snapshot {
  store::CorpusManifest manifest;
  std::shared_ptr<const store::EmbeddingStore> store;
  std::shared_ptr<const index::AnnIndex> index;
  std::uint64_t generation = 0;
};

struct SearchOutcome {
  std::vector<rerank::RerankedHit> hits;  // s1/s2/s_final unset when !reranked
  bool reranked = false;
  std::size_t candidates = 0;
};

struct NeighborFrame {
  std::int64_t frame_index = 0;
  double timestamp_s = 0.0;
  bool is_keyframe = false;
};

class SearchService {
 public:
  // Loads the corpus and builds (or loads) the index. A provider may be
  // injected for tests; otherwise one is created from provider_url.
  explicit SearchService(ServiceConfig config, std::shared_ptr<EmbeddingProvider> provider = nullptr);
  // Serves an in-memory store (tests, eval fixtures); reload is unavailable.
  SearchService(ServiceConfig config, std::shared_ptr<const store::EmbeddingStore> store,
                std::shared_ptr<EmbeddingProvider> provider = nullptr);

  std::shared_ptr<const Snapshot> snapshot() const;
  // Re-reads the manifest and swaps the snapshot; in-flight requests keep the
  // old one.
  std::shared_ptr<const Snapshot> Reload();

  const ServiceConfig& config() const { return config_; }
  AnnotationLog& annotations() { return *annotations_; }

  // Throws kProviderUnavailable when no provider is configured.
  std::vector<float> EmbedText(const std::string& text, std::size_t dim);

  SearchOutcome Search(const Snapshot& snap, std::span<const float> query, std::size_t top_k, bool rerank,
                       const rerank::RerankParams& params) const;

  // Pivot outside the video is kNotFound here (the HTTP contract).
  temporal::MomentResult Temporal(const Snapshot& snap, std::span<const float> q_start,
                                  std::span<const float> q_end, const temporal::PivotRef& pivot,
                                  const temporal::AbtsParams& params) const;

  // Grid frames in [frame - span, frame + span] (frame units), clamped; an
  // empty range collapses to the grid frame nearest `frame`.
  std::vector<NeighborFrame> Neighbors(const Snapshot& snap, const std::string& video_id, std::int64_t frame,
                                       std::int64_t span) const;

  // Thumbnail file for a keyframe, from the manifest template.
  std::optional<std::filesystem::path> ThumbnailPath(const Snapshot& snap, const std::string& video_id,
                                                     std::int64_t frame) const;

 private:
  std::shared_ptr<const Snapshot> LoadSnapshot(std::uint64_t generation) const;

  ServiceConfig config_;
  std::shared_ptr<EmbeddingProvider> provider_;
  std::unique_ptr<AnnotationLog> annotations_;
  bool reloadable_ = true;
  mutable std::mutex mu_;
  std::shared_ptr<const Snapshot> snapshot_;
};

}  // namespace grab::service
