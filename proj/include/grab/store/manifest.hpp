#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "grab/ingest/phash.hpp"

namespace grab::store {

inline constexpr const char* kDtypeF32Le = "f32le";

struct KeyframeEntry {
  std::int64_t frame_index = 0;
  std::int64_t shot_id = 0;
  std::optional<ingest::PerceptualHash> phash;
};

struct VideoEntry {
  std::string video_id;
  double fps = 0.0;
  std::int64_t frame_count = 0;
  double duration_s = 0.0;
  std::string embedding_file;  // relative to the manifest directory
  int dim = 0;
  std::string dtype = kDtypeF32Le;
  std::vector<KeyframeEntry> keyframes;  // one embedding row each, in order
  std::optional<std::string> sequence_embedding_file;
  std::int64_t sequence_stride = 1;

  // Rows in the strided sequence file: frames 0, stride, 2*stride, ...
  std::int64_t SequenceRows() const { return (frame_count + sequence_stride - 1) / sequence_stride; }
};

struct CorpusManifest {
  int dim = 0;  // 0 when no video declares one yet
  std::optional<std::string> thumbnail_template;  // "{video_id}" and "{frame_index}" placeholders
  std::vector<VideoEntry> videos;
  std::filesystem::path base_dir;  // where relative paths resolve; not serialized

  std::filesystem::path Resolve(const std::string& relative) const;
  void Validate() const;  // throws kLoad
};

CorpusManifest ManifestFromJson(const nlohmann::json& j, std::filesystem::path base_dir);
nlohmann::json ManifestToJson(const CorpusManifest& manifest);

CorpusManifest LoadManifest(const std::filesystem::path& path);
void SaveManifest(const CorpusManifest& manifest, const std::filesystem::path& path);

// Raw little-endian float32 row-major blobs with no header.
std::vector<float> ReadF32Blob(const std::filesystem::path& path, std::size_t rows, std::size_t dim);
std::vector<float> ReadF32Blob(const std::filesystem::path& path);  // any multiple of 4 bytes
void WriteF32Blob(const std::filesystem::path& path, const std::vector<float>& values);

}  // namespace grab::store
