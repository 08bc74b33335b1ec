#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "grab/ingest/phash.hpp"

namespace grab::ingest {

// Inclusive frame range [a, b] of one shot.
struct ShotBoundary {
  std::int64_t a = 0;
  std::int64_t b = 0;
};

struct DedupConfig {
  double tau = 0.8;  // similarity threshold, 0 < tau <= 1

  void Validate() const;
};

struct KeyframeRecord {
  std::string video_id;
  std::int64_t frame_index = 0;
  double timestamp_s = 0.0;
  PerceptualHash phash;
  std::int64_t embedding_id = -1;
  std::int64_t shot_id = 0;
};

// a + floor(i * (b - a) / 3) for i = 0..3, ascending, duplicates collapsed.
std::vector<std::int64_t> SelectKeyframeIndices(const ShotBoundary& shot);

// D <= N * (1 - tau), evaluated as D <= N - N * tau in double precision.
bool IsNearDuplicate(PerceptualHash a, PerceptualHash b, const DedupConfig& cfg);

// Greedy temporal clustering over hashes in frame order: a frame joins the
// open cluster iff it is a near-duplicate of that cluster's first frame.
// Returns the positions of the cluster representatives.
std::vector<std::size_t> ClusterRepresentatives(std::span<const PerceptualHash> hashes,
                                                const DedupConfig& cfg);

// Keyframes of one shot sorted by frame_index; returns the retained subset.
std::vector<KeyframeRecord> DeduplicateShot(std::span<const KeyframeRecord> keyframes,
                                            const DedupConfig& cfg);

// Validates sorted, non-overlapping shots inside [0, frame_count - 1].
// Throws kIngest naming the video and the offending shot.
void ValidateShots(const std::string& video_id, std::span<const ShotBoundary> shots,
                   std::int64_t frame_count);

// Fallback segmentation when no detector output exists.
std::vector<ShotBoundary> UniformShots(std::int64_t frame_count, std::int64_t shot_len);

}  // namespace grab::ingest
