#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "grab/ingest/phash.hpp"
#include "grab/store/manifest.hpp"

namespace grab::store {

struct RowInfo {
  std::uint32_t video = 0;  // index into EmbeddingStore::videos()
  std::int64_t frame_index = 0;
  std::int64_t shot_id = 0;
  double timestamp_s = 0.0;
  std::optional<ingest::PerceptualHash> phash;
};

struct VideoInfo {
  std::string video_id;
  double fps = 0.0;
  std::int64_t frame_count = 0;
  double duration_s = 0.0;
  std::size_t first_row = 0;  // keyframe rows [first_row, first_row + row_count)
  std::size_t row_count = 0;
  std::int64_t stride = 1;
  std::vector<float> sequence;  // normalized, SequenceRows() x dim; empty if absent

  bool has_sequence() const { return !sequence.empty(); }
  double Timestamp(std::int64_t frame) const { return static_cast<double>(frame) / fps; }
};

struct FrameEmbedding {
  std::int64_t frame_index = 0;
  std::span<const float> vector;
};

// Immutable, L2-normalized keyframe and sequence embeddings with id lookup.
// Share as std::shared_ptr<const EmbeddingStore>; concurrent readers need no
// locking.
class EmbeddingStore {
 public:
  class Builder;

  static std::shared_ptr<const EmbeddingStore> Load(const CorpusManifest& manifest);
  static std::shared_ptr<const EmbeddingStore> Load(const std::filesystem::path& manifest_path);

  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return row_info_.size(); }
  bool empty() const { return row_info_.empty(); }

  std::span<const float> matrix() const { return data_; }
  std::span<const float> row(std::size_t r) const {
    return std::span<const float>(data_).subspan(r * dim_, dim_);
  }
  const RowInfo& row_info(std::size_t r) const { return row_info_[r]; }
  const std::string& row_video_id(std::size_t r) const { return videos_[row_info_[r].video].video_id; }

  // Position of row r in (video_id, frame_index) ascending order; the
  // deterministic tie-break for equal scores.
  std::uint32_t tie_rank(std::size_t r) const { return tie_rank_[r]; }

  const std::vector<VideoInfo>& videos() const { return videos_; }
  std::optional<std::uint32_t> FindVideo(const std::string& video_id) const;
  const VideoInfo& GetVideo(const std::string& video_id) const;  // throws kNotFound

  std::optional<std::size_t> FindRow(const std::string& video_id, std::int64_t frame_index) const;
  // Throws kNotFound for an unknown video or frame.
  std::span<const float> GetKeyframeEmbedding(const std::string& video_id,
                                              std::int64_t frame_index) const;

  // Strided sequence frames whose timestamps fall in
  // [t(center) - half_span_s, t(center) + half_span_s], clamped to the video.
  // An empty window collapses to the grid frame nearest to center.
  std::vector<FrameEmbedding> GetFrameWindow(const std::string& video_id, std::int64_t center,
                                             double half_span_s) const;

  // Strided sequence frames with lo <= frame_index <= hi (frame units),
  // clamped to the video; may be empty. Throws kCapability when the video has
  // no sequence embeddings.
  std::vector<FrameEmbedding> SequenceFramesInRange(std::uint32_t video, double lo, double hi) const;
  FrameEmbedding SequenceFrame(std::uint32_t video, std::int64_t grid_frame) const;

  // Grid frame indices (multiples of the stride) in [lo, hi] clamped to the
  // video. Works for videos without sequence embeddings.
  static std::vector<std::int64_t> GridFrames(const VideoInfo& video, double lo, double hi);
  static std::int64_t NearestGridFrame(const VideoInfo& video, std::int64_t frame);

  // FNV-1a over the normalized matrix; identifies the corpus an index was
  // built from.
  std::uint64_t Fingerprint() const { return fingerprint_; }

 private:
  EmbeddingStore() = default;

  std::size_t dim_ = 0;
  std::vector<float> data_;
  std::vector<RowInfo> row_info_;
  std::vector<std::uint32_t> tie_rank_;
  std::vector<VideoInfo> videos_;
  std::unordered_map<std::string, std::uint32_t> video_index_;
  std::vector<std::unordered_map<std::int64_t, std::size_t>> frame_to_row_;
  std::uint64_t fingerprint_ = 0;
};

// Assembles a store from in-memory vectors. Normalizes every row and rejects
// NaN/Inf components and zero rows with kLoad naming the video and row.
class EmbeddingStore::Builder {
 public:
  explicit Builder(std::size_t dim) : dim_(dim) {}

  struct Video {
    std::string video_id;
    double fps = 0.0;
    std::int64_t frame_count = 0;
    std::vector<KeyframeEntry> keyframes;
    std::vector<float> keyframe_vectors;  // keyframes.size() x dim
    std::int64_t stride = 1;
    std::vector<float> sequence_vectors;  // ceil(frame_count / stride) x dim, or empty
  };

  Builder& AddVideo(Video video);
  std::shared_ptr<const EmbeddingStore> Build();

 private:
  std::size_t dim_;
  std::vector<Video> videos_;
};

// Scales every dim-sized row to unit length; returns the index of the first
// invalid row (non-finite or zero) if any.
std::optional<std::size_t> NormalizeRows(std::span<float> values, std::size_t dim);

}  // namespace grab::store
