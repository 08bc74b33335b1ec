#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "grab/ingest/keyframes.hpp"
#include "grab/store/manifest.hpp"

namespace grab::ingest {

// Detector output for one video.
struct ShotFile {
  std::string video_id;
  double fps = 0.0;
  std::int64_t frame_count = 0;
  std::vector<ShotBoundary> shots;
};

ShotFile ParseShotFile(const nlohmann::json& j);
ShotFile LoadShotFile(const std::filesystem::path& path);

// frame_index -> hash, from JSONL lines {"frame_index": n, "phash_hex": "..."}.
std::map<std::int64_t, PerceptualHash> LoadHashFile(const std::filesystem::path& path);

// One entry of the ingest (source) manifest. Paths resolve against the
// manifest directory. Hashes come from `hash_file` or from PGM rasters in
// `frames_dir` named by `frame_pattern` ("{frame_index}" is substituted).
// `embedding_file` rows align either with every selected keyframe candidate
// (before dedup) or with the retained keyframes only.
struct SourceVideo {
  std::string video_id;
  std::optional<double> fps;
  std::optional<std::int64_t> frame_count;
  std::optional<std::filesystem::path> shot_file;
  std::optional<std::filesystem::path> hash_file;
  std::optional<std::filesystem::path> frames_dir;
  std::string frame_pattern = "{frame_index}.pgm";
  std::filesystem::path embedding_file;
  int dim = 0;
  std::string dtype = store::kDtypeF32Le;
  std::optional<std::filesystem::path> sequence_embedding_file;
  std::optional<std::int64_t> sequence_stride;
};

struct SourceManifest {
  std::optional<std::string> thumbnail_template;
  std::vector<SourceVideo> videos;
};

SourceManifest ParseSourceManifest(const nlohmann::json& j, const std::filesystem::path& base_dir);
SourceManifest LoadSourceManifest(const std::filesystem::path& path);

struct IngestOptions {
  DedupConfig dedup;
  std::int64_t fallback_shot_len = 120;
};

struct IngestedVideo {
  store::VideoEntry entry;             // embedding_file left for the catalog to assign
  std::vector<float> embeddings;       // raw retained rows, entry.keyframes.size() x dim
  std::vector<KeyframeRecord> records;
  std::size_t candidate_count = 0;     // keyframes selected before dedup
};

// Shot selection, hashing, within-shot dedup and embedding row selection for
// one video. Errors are kIngest and name the video and the field.
IngestedVideo IngestVideo(const SourceVideo& source, const IngestOptions& options);

// Keyframe catalog backed by a corpus directory: corpus.json plus one
// retained-embedding blob per video. Ingesting a video_id again replaces its
// previous entry. Safe to call Upsert from several ingest threads.
class Catalog {
 public:
  static constexpr const char* kManifestName = "corpus.json";

  // Opens an existing corpus directory or starts an empty catalog.
  static Catalog Open(const std::filesystem::path& dir);

  Catalog(const Catalog&) = delete;
  Catalog& operator=(const Catalog&) = delete;
  Catalog(Catalog&& other) noexcept;

  void Upsert(IngestedVideo video);
  void SetThumbnailTemplate(std::optional<std::string> tmpl);

  // Writes pending blobs, then the manifest (atomically renamed).
  void Save();

  store::CorpusManifest Manifest() const;
  std::size_t video_count() const;
  std::size_t keyframe_count() const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  explicit Catalog(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  store::CorpusManifest manifest_;
  std::map<std::string, std::vector<float>> pending_;
};

struct IngestSummary {
  std::size_t videos = 0;
  std::size_t candidates = 0;
  std::size_t retained = 0;
};

// Ingests every source video (in parallel when threads > 1) into the catalog
// and saves it.
IngestSummary IngestAll(const SourceManifest& manifest, Catalog& catalog,
                        const IngestOptions& options, unsigned threads = 1);

}  // namespace grab::ingest
