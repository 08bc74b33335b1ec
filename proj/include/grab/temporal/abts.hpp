#pragma once

// Adaptive bidirectional temporal search: from a pivot frame, the start
// boundary is searched backwards and the end boundary forwards over several
// window sizes. Frames are scored by
//   c_i = lambda_s * s_i + lambda_t * t_i
// where s_i is the cosine to the sub-query and t_i = 1 - min(1, 2 * sigma)
// is the stability of the frame against its neighbours in the strided list.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "grab/store/embedding_store.hpp"

namespace grab::temporal {

struct AbtsParams {
  std::vector<double> windows_s{10.0, 15.0, 20.0};
  double lambda_s = 0.7;
  double lambda_t = 0.3;
  int neighborhood_radius = 2;

  // Validates and rescales the lambdas to sum to 1.
  static AbtsParams Make(std::vector<double> windows_s, double lambda_s, double lambda_t,
                         int neighborhood_radius = 2);
  void Validate() const;
};

struct BoundaryCandidate {
  std::int64_t frame_index = 0;
  float similarity = 0.f;  // s_i
  float stability = 0.f;   // t_i
  double confidence = 0.0;  // c_i
};

struct PivotRef {
  std::string video_id;
  std::int64_t frame_index = 0;
};

struct WindowDiagnostics {
  double window_s = 0.0;
  std::size_t start_candidates = 0;
  std::size_t end_candidates = 0;
  BoundaryCandidate start;
  BoundaryCandidate end;
};

struct MomentResult {
  std::string video_id;
  std::int64_t pivot_frame = 0;
  std::int64_t f_s = 0;
  std::int64_t f_e = 0;
  double t_s = 0.0;
  double t_e = 0.0;
  double confidence_start = 0.0;
  double confidence_end = 0.0;
  double window_start_s = 0.0;
  double window_end_s = 0.0;
  std::vector<std::string> warnings;
  std::vector<WindowDiagnostics> windows;
};

// Cosine similarity; throws kDimensionMismatch.
float Similarity(std::span<const float> a, std::span<const float> b);

// t = 1 - min(1, 2 * population stddev of `neighbor_similarities`); an empty
// neighbourhood is maximally unstable (t = 0).
float StabilityFromSimilarities(std::span<const float> neighbor_similarities);
float Stability(std::span<const std::span<const float>> neighbors, std::span<const float> frame);

// Scores every frame of an ordered strided list. Neighbourhoods are the
// frames within +-radius positions in the list, excluding the frame itself.
std::vector<BoundaryCandidate> ScoreFrames(std::span<const float> query,
                                           std::span<const store::FrameEmbedding> frames,
                                           const AbtsParams& params);

struct AdaptiveResult {
  std::int64_t frame_index = 0;
  double confidence = 0.0;
  std::size_t position = 0;  // index into the frame list
};

// argmax of c_i, earliest position on ties. frames must be non-empty.
AdaptiveResult AdaptiveSearch(std::span<const float> query, std::span<const store::FrameEmbedding> frames,
                              const AbtsParams& params);

// Throws kNotFound (unknown video), kInvalidInput (pivot out of range),
// kCapability (no sequence embeddings), kDimensionMismatch.
MomentResult TemporalSearch(std::span<const float> query_start, std::span<const float> query_end,
                            const PivotRef& pivot, const store::EmbeddingStore& store,
                            const AbtsParams& params);

// Splits a query into start and end portions. With a hint the split is at
// that byte offset; otherwise at the sentence boundary nearest the midpoint.
// A single sentence is used for both sides.
std::pair<std::string, std::string> SplitQuery(std::string_view text,
                                                std::optional<std::size_t> split_hint = std::nullopt);

}  // namespace grab::temporal
