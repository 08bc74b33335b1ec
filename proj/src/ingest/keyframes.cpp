#include "grab/ingest/keyframes.hpp"

#include <algorithm>

#include "grab/error.hpp"

namespace grab::ingest {

void DedupConfig::Validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "tau must lie in (0, 1], got " + std::to_string(tau));
  }
}

std::vector<std::int64_t> SelectKeyframeIndices(const ShotBoundary& shot) {
  std::vector<std::int64_t> out;
  out.reserve(4);
  const std::int64_t span = shot.b - shot.a;
  for (std::int64_t i = 0; i < 4; ++i) {
    const std::int64_t idx = shot.a + (i * span) / 3;  // span >= 0, so this is floor
    if (out.empty() || out.back() != idx) out.push_back(idx);
  }
  return out;
}

bool IsNearDuplicate(PerceptualHash a, PerceptualHash b, const DedupConfig& cfg) {
  constexpr double n = PerceptualHash::kBits;
  const double threshold = n - n * cfg.tau;
  return static_cast<double>(HammingDistance(a, b)) <= threshold;
}

std::vector<std::size_t> ClusterRepresentatives(std::span<const PerceptualHash> hashes,
                                                const DedupConfig& cfg) {
  std::vector<std::size_t> reps;
  for (std::size_t i = 0; i < hashes.size(); ++i) {
    if (reps.empty() || !IsNearDuplicate(hashes[reps.back()], hashes[i], cfg)) reps.push_back(i);
  }
  return reps;
}

std::vector<KeyframeRecord> DeduplicateShot(std::span<const KeyframeRecord> keyframes,
                                            const DedupConfig& cfg) {
  std::vector<PerceptualHash> hashes;
  hashes.reserve(keyframes.size());
  for (const auto& k : keyframes) hashes.push_back(k.phash);
  std::vector<KeyframeRecord> kept;
  for (std::size_t pos : ClusterRepresentatives(hashes, cfg)) kept.push_back(keyframes[pos]);
  return kept;
}

void ValidateShots(const std::string& video_id, std::span<const ShotBoundary> shots,
                   std::int64_t frame_count) {
  for (std::size_t i = 0; i < shots.size(); ++i) {
    const auto& s = shots[i];
    const std::string where = "video '" + video_id + "' field 'shots[" + std::to_string(i) + "]'";
    if (s.a < 0 || s.b < s.a) {
      throw Error(ErrorCode::kIngest, where + ": need 0 <= a <= b");
    }
    if (s.b >= frame_count) {
      throw Error(ErrorCode::kIngest,
                  where + ": frame " + std::to_string(s.b) + " beyond frame_count " +
                      std::to_string(frame_count));
    }
    if (i > 0 && s.a <= shots[i - 1].b) {
      throw Error(ErrorCode::kIngest, where + ": shots overlap or are unsorted");
    }
  }
}

std::vector<ShotBoundary> UniformShots(std::int64_t frame_count, std::int64_t shot_len) {
  if (shot_len < 1) throw Error(ErrorCode::kInvalidInput, "fallback shot length must be >= 1");
  std::vector<ShotBoundary> shots;
  for (std::int64_t a = 0; a < frame_count; a += shot_len) {
    shots.push_back({a, std::min(frame_count - 1, a + shot_len - 1)});
  }
  return shots;
}

}  // namespace grab::ingest
