#include "grab/store/embedding_store.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "grab/error.hpp"
#include "grab/simd/kernels.hpp"

namespace grab::store {
namespace {

std::uint64_t Fnv1a(std::span<const float> values) {
  std::uint64_t h = 1469598103934665603ull;
  const auto* bytes = reinterpret_cast<const unsigned char*>(values.data());
  for (std::size_t i = 0; i < values.size_bytes(); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

std::optional<std::size_t> NormalizeRows(std::span<float> values, std::size_t dim) {
  const std::size_t rows = dim == 0 ? 0 : values.size() / dim;
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = values.subspan(r * dim, dim);
    for (float x : row) {
      if (!std::isfinite(x)) return r;
    }
    if (simd::NormalizeInPlace(row) == 0.0f) return r;
  }
  return std::nullopt;
}

EmbeddingStore::Builder& EmbeddingStore::Builder::AddVideo(Video video) {
  videos_.push_back(std::move(video));
  return *this;
}

std::shared_ptr<const EmbeddingStore> EmbeddingStore::Builder::Build() {
  std::shared_ptr<EmbeddingStore> store(new EmbeddingStore());
  store->dim_ = dim_;
  std::size_t total = 0;
  for (const auto& v : videos_) total += v.keyframes.size();
  store->data_.reserve(total * dim_);
  store->row_info_.reserve(total);

  for (auto& v : videos_) {
    const std::string where = "video '" + v.video_id + "'";
    if (store->video_index_.count(v.video_id) != 0) {
      throw Error(ErrorCode::kLoad, "duplicate video_id '" + v.video_id + "'");
    }
    if (v.keyframe_vectors.size() != v.keyframes.size() * dim_) {
      throw Error(ErrorCode::kLoad, where + ": " + std::to_string(v.keyframe_vectors.size()) +
                                        " values for " + std::to_string(v.keyframes.size()) +
                                        " keyframes of dim " + std::to_string(dim_));
    }
    if (auto bad = NormalizeRows(v.keyframe_vectors, dim_)) {
      throw Error(ErrorCode::kLoad, where + ": keyframe embedding row " + std::to_string(*bad) +
                                        " is zero or non-finite");
    }
    const auto video_idx = static_cast<std::uint32_t>(store->videos_.size());
    VideoInfo info;
    info.video_id = v.video_id;
    info.fps = v.fps;
    info.frame_count = v.frame_count;
    info.duration_s = v.frame_count / v.fps;
    info.first_row = store->row_info_.size();
    info.row_count = v.keyframes.size();
    info.stride = v.stride;
    if (!v.sequence_vectors.empty()) {
      const auto expected_rows = static_cast<std::size_t>((v.frame_count + v.stride - 1) / v.stride);
      if (v.sequence_vectors.size() != expected_rows * dim_) {
        throw Error(ErrorCode::kLoad, where + ": sequence embeddings hold " +
                                          std::to_string(v.sequence_vectors.size() / dim_) +
                                          " rows, expected " + std::to_string(expected_rows));
      }
      if (auto bad = NormalizeRows(v.sequence_vectors, dim_)) {
        throw Error(ErrorCode::kLoad, where + ": sequence embedding row " + std::to_string(*bad) +
                                          " is zero or non-finite");
      }
      info.sequence = std::move(v.sequence_vectors);
    }
    std::unordered_map<std::int64_t, std::size_t> frames;
    for (std::size_t k = 0; k < v.keyframes.size(); ++k) {
      const auto& kf = v.keyframes[k];
      const std::size_t row = store->row_info_.size();
      frames.emplace(kf.frame_index, row);
      store->row_info_.push_back(RowInfo{video_idx, kf.frame_index, kf.shot_id,
                                         info.Timestamp(kf.frame_index), kf.phash});
    }
    store->data_.insert(store->data_.end(), v.keyframe_vectors.begin(), v.keyframe_vectors.end());
    store->video_index_.emplace(info.video_id, video_idx);
    store->frame_to_row_.push_back(std::move(frames));
    store->videos_.push_back(std::move(info));
  }

  std::vector<std::size_t> order(store->row_info_.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ia = store->row_info_[a];
    const auto& ib = store->row_info_[b];
    const auto& va = store->videos_[ia.video].video_id;
    const auto& vb = store->videos_[ib.video].video_id;
    if (va != vb) return va < vb;
    return ia.frame_index < ib.frame_index;
  });
  store->tie_rank_.resize(order.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    store->tie_rank_[order[pos]] = static_cast<std::uint32_t>(pos);
  }
  store->fingerprint_ = Fnv1a(store->data_);
  videos_.clear();
  return store;
}

std::shared_ptr<const EmbeddingStore> EmbeddingStore::Load(const CorpusManifest& manifest) {
  manifest.Validate();
  Builder builder(static_cast<std::size_t>(manifest.dim));
  for (const auto& v : manifest.videos) {
    Builder::Video video;
    video.video_id = v.video_id;
    video.fps = v.fps;
    video.frame_count = v.frame_count;
    video.keyframes = v.keyframes;
    video.keyframe_vectors = ReadF32Blob(manifest.Resolve(v.embedding_file), v.keyframes.size(),
                                         static_cast<std::size_t>(v.dim));
    video.stride = v.sequence_stride;
    if (v.sequence_embedding_file) {
      video.sequence_vectors =
          ReadF32Blob(manifest.Resolve(*v.sequence_embedding_file),
                      static_cast<std::size_t>(v.SequenceRows()), static_cast<std::size_t>(v.dim));
    }
    builder.AddVideo(std::move(video));
  }
  return builder.Build();
}

std::shared_ptr<const EmbeddingStore> EmbeddingStore::Load(const std::filesystem::path& path) {
  return Load(LoadManifest(path));
}

std::optional<std::uint32_t> EmbeddingStore::FindVideo(const std::string& video_id) const {
  const auto it = video_index_.find(video_id);
  if (it == video_index_.end()) return std::nullopt;
  return it->second;
}

const VideoInfo& EmbeddingStore::GetVideo(const std::string& video_id) const {
  const auto idx = FindVideo(video_id);
  if (!idx) throw Error(ErrorCode::kNotFound, "unknown video '" + video_id + "'");
  return videos_[*idx];
}

std::optional<std::size_t> EmbeddingStore::FindRow(const std::string& video_id,
                                                   std::int64_t frame_index) const {
  const auto idx = FindVideo(video_id);
  if (!idx) return std::nullopt;
  const auto& frames = frame_to_row_[*idx];
  const auto it = frames.find(frame_index);
  if (it == frames.end()) return std::nullopt;
  return it->second;
}

std::span<const float> EmbeddingStore::GetKeyframeEmbedding(const std::string& video_id,
                                                            std::int64_t frame_index) const {
  const auto r = FindRow(video_id, frame_index);
  if (!r) {
    throw Error(ErrorCode::kNotFound, "no keyframe " + std::to_string(frame_index) +
                                          " in video '" + video_id + "'");
  }
  return row(*r);
}

std::vector<std::int64_t> EmbeddingStore::GridFrames(const VideoInfo& video, double lo,
                                                     double hi) {
  constexpr double kEps = 1e-9;
  const std::int64_t stride = video.stride;
  const std::int64_t grid_rows = (video.frame_count + stride - 1) / stride;
  const double clamped_lo = std::max(0.0, lo - kEps);
  const double clamped_hi = std::min(static_cast<double>(video.frame_count - 1), hi + kEps);
  std::vector<std::int64_t> frames;
  if (clamped_lo > clamped_hi) return frames;
  const auto k_lo = static_cast<std::int64_t>(std::ceil(clamped_lo / stride));
  const auto k_hi = std::min(static_cast<std::int64_t>(std::floor(clamped_hi / stride)), grid_rows - 1);
  for (std::int64_t k = k_lo; k <= k_hi; ++k) frames.push_back(k * stride);
  return frames;
}

std::int64_t EmbeddingStore::NearestGridFrame(const VideoInfo& video, std::int64_t frame) {
  const std::int64_t stride = video.stride;
  const std::int64_t grid_rows = (video.frame_count + stride - 1) / stride;
  const std::int64_t c = std::clamp<std::int64_t>(frame, 0, video.frame_count - 1);
  std::int64_t k = c / stride;
  // ties resolve to the earlier frame
  if (k + 1 < grid_rows && (k + 1) * stride - c < c - k * stride) ++k;
  return std::min(k, grid_rows - 1) * stride;
}

FrameEmbedding EmbeddingStore::SequenceFrame(std::uint32_t video_idx, std::int64_t grid_frame) const {
  const auto& video = videos_.at(video_idx);
  if (!video.has_sequence()) {
    throw Error(ErrorCode::kCapability,
                "video '" + video.video_id + "' has no sequence embeddings; temporal search unavailable");
  }
  const auto k = static_cast<std::size_t>(grid_frame / video.stride);
  return {grid_frame, std::span<const float>(video.sequence).subspan(k * dim_, dim_)};
}

std::vector<FrameEmbedding> EmbeddingStore::SequenceFramesInRange(std::uint32_t video_idx, double lo,
                                                                  double hi) const {
  const auto& video = videos_.at(video_idx);
  std::vector<FrameEmbedding> out;
  if (!video.has_sequence()) {
    SequenceFrame(video_idx, 0);  // throws kCapability
  }
  for (std::int64_t f : GridFrames(video, lo, hi)) out.push_back(SequenceFrame(video_idx, f));
  return out;
}

std::vector<FrameEmbedding> EmbeddingStore::GetFrameWindow(const std::string& video_id,
                                                           std::int64_t center,
                                                           double half_span_s) const {
  const auto idx = FindVideo(video_id);
  if (!idx) throw Error(ErrorCode::kNotFound, "unknown video '" + video_id + "'");
  if (half_span_s < 0) throw Error(ErrorCode::kInvalidInput, "half_span_s must be >= 0");
  const auto& video = videos_[*idx];
  const double half_frames = half_span_s * video.fps;
  const auto c = static_cast<double>(center);
  auto out = SequenceFramesInRange(*idx, c - half_frames, c + half_frames);
  if (out.empty()) out.push_back(SequenceFrame(*idx, NearestGridFrame(video, center)));
  return out;
}

}  // namespace grab::store
