#include "grab/temporal/abts.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "grab/error.hpp"
#include "grab/simd/kernels.hpp"

namespace grab::temporal {

AbtsParams AbtsParams::Make(std::vector<double> windows_s, double lambda_s, double lambda_t,
                            int neighborhood_radius) {
  if (!std::isfinite(lambda_s) || !std::isfinite(lambda_t) || lambda_s < 0 || lambda_t < 0 ||
      lambda_s + lambda_t <= 0) {
    throw Error(ErrorCode::kInvalidInput, "lambda_s and lambda_t must be non-negative with a positive sum");
  }
  AbtsParams p;
  p.windows_s = std::move(windows_s);
  const double sum = lambda_s + lambda_t;
  p.lambda_s = lambda_s / sum;
  p.lambda_t = lambda_t / sum;
  p.neighborhood_radius = neighborhood_radius;
  p.Validate();
  return p;
}

void AbtsParams::Validate() const {
  if (windows_s.empty()) throw Error(ErrorCode::kInvalidInput, "windows_s must not be empty");
  for (double w : windows_s) {
    if (!std::isfinite(w) || w <= 0) throw Error(ErrorCode::kInvalidInput, "windows must be positive");
  }
  if (!(lambda_s >= 0) || !(lambda_t >= 0) || std::abs(lambda_s + lambda_t - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidInput, "lambda_s + lambda_t must equal 1");
  }
  if (neighborhood_radius < 1) throw Error(ErrorCode::kInvalidInput, "neighborhood_radius must be >= 1");
}

float Similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "similarity: dimension " + std::to_string(a.size()) +
                                                   " vs " + std::to_string(b.size()));
  }
  const auto& k = simd::Active();
  const double ab = k.dot(a.data(), b.data(), a.size());
  const double na = std::sqrt(static_cast<double>(k.dot(a.data(), a.data(), a.size())));
  const double nb = std::sqrt(static_cast<double>(k.dot(b.data(), b.data(), b.size())));
  if (na == 0 || nb == 0) return 0.f;
  return static_cast<float>(std::clamp(ab / (na * nb), -1.0, 1.0));
}

float StabilityFromSimilarities(std::span<const float> sims) {
  if (sims.empty()) return 0.f;
  double mean = 0;
  for (float s : sims) mean += s;
  mean /= static_cast<double>(sims.size());
  double var = 0;
  for (float s : sims) var += (s - mean) * (s - mean);
  var /= static_cast<double>(sims.size());
  const double t = 1.0 - std::min(1.0, 2.0 * std::sqrt(var));
  return static_cast<float>(std::clamp(t, 0.0, 1.0));
}

float Stability(std::span<const std::span<const float>> neighbors, std::span<const float> frame) {
  std::vector<float> sims;
  sims.reserve(neighbors.size());
  for (auto n : neighbors) sims.push_back(Similarity(n, frame));
  return StabilityFromSimilarities(sims);
}

std::vector<BoundaryCandidate> ScoreFrames(std::span<const float> query,
                                           std::span<const store::FrameEmbedding> frames,
                                           const AbtsParams& params) {
  const auto& k = simd::Active();
  const std::size_t n = frames.size();
  const auto r = static_cast<std::size_t>(params.neighborhood_radius);
  std::vector<BoundaryCandidate> out(n);
  std::vector<float> sims;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& fi = frames[i].vector;
    if (fi.size() != query.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "frame dimension does not match query");
    }
    sims.clear();
    const std::size_t lo = i >= r ? i - r : 0;
    const std::size_t hi = std::min(n - 1, i + r);
    for (std::size_t j = lo; j <= hi; ++j) {
      if (j != i) sims.push_back(k.dot(frames[j].vector.data(), fi.data(), fi.size()));
    }
    auto& c = out[i];
    c.frame_index = frames[i].frame_index;
    c.similarity = std::clamp(k.dot(query.data(), fi.data(), fi.size()), -1.f, 1.f);
    c.stability = StabilityFromSimilarities(sims);
    c.confidence = params.lambda_s * c.similarity + params.lambda_t * c.stability;
  }
  return out;
}

namespace {

std::vector<float> UnitQuery(std::span<const float> q, std::size_t dim, const char* what) {
  if (q.size() != dim) {
    throw Error(ErrorCode::kDimensionMismatch, std::string(what) + " has dimension " +
                                                   std::to_string(q.size()) + ", expected " +
                                                   std::to_string(dim));
  }
  std::vector<float> v(q.begin(), q.end());
  for (float x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kInvalidInput, std::string(what) + " is not finite");
  }
  if (simd::NormalizeInPlace(v) == 0.f) throw Error(ErrorCode::kInvalidInput, std::string(what) + " is zero");
  return v;
}

BoundaryCandidate Best(const std::vector<BoundaryCandidate>& scored) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scored.size(); ++i) {
    if (scored[i].confidence > scored[best].confidence) best = i;
  }
  return scored[best];
}

}  // namespace

AdaptiveResult AdaptiveSearch(std::span<const float> query, std::span<const store::FrameEmbedding> frames,
                              const AbtsParams& params) {
  if (frames.empty()) throw Error(ErrorCode::kInvalidInput, "adaptive search needs at least one frame");
  const auto scored = ScoreFrames(query, frames, params);
  std::size_t best = 0;
  for (std::size_t i = 1; i < scored.size(); ++i) {
    if (scored[i].confidence > scored[best].confidence) best = i;
  }
  return {scored[best].frame_index, scored[best].confidence, best};
}

MomentResult TemporalSearch(std::span<const float> query_start, std::span<const float> query_end,
                            const PivotRef& pivot, const store::EmbeddingStore& store,
                            const AbtsParams& params) {
  params.Validate();
  const auto vidx = store.FindVideo(pivot.video_id);
  if (!vidx) throw Error(ErrorCode::kNotFound, "unknown video '" + pivot.video_id + "'");
  const auto& video = store.videos()[*vidx];
  if (!video.has_sequence()) {
    throw Error(ErrorCode::kCapability, "video '" + pivot.video_id + "' has no sequence embeddings");
  }
  const std::int64_t p = pivot.frame_index;
  if (p < 0 || p >= video.frame_count) {
    throw Error(ErrorCode::kInvalidInput, "pivot frame " + std::to_string(p) + " outside [0, " +
                                              std::to_string(video.frame_count - 1) + "]");
  }
  const auto qs = UnitQuery(query_start, store.dim(), "query_start");
  const auto qe = UnitQuery(query_end, store.dim(), "query_end");

  std::vector<double> windows = params.windows_s;
  std::sort(windows.begin(), windows.end());
  windows.erase(std::unique(windows.begin(), windows.end()), windows.end());

  MomentResult result;
  result.video_id = video.video_id;
  result.pivot_frame = p;

  // Side scan; an empty range (pivot past the last grid frame) falls back to
  // the nearest grid frame.
  auto side = [&](std::span<const float> q, double lo, double hi, std::size_t& count) {
    auto frames = store.SequenceFramesInRange(*vidx, lo, hi);
    if (frames.empty()) frames.push_back(store.SequenceFrame(*vidx, store::EmbeddingStore::NearestGridFrame(video, p)));
    count = frames.size();
    return Best(ScoreFrames(q, frames, params));
  };

  bool have = false;
  BoundaryCandidate best_s, best_e;
  const auto pd = static_cast<double>(p);
  for (double w : windows) {
    const double span = w * video.fps;
    WindowDiagnostics d;
    d.window_s = w;
    d.start = side(qs, pd - span, pd, d.start_candidates);
    d.end = side(qe, pd, pd + span, d.end_candidates);
    // Windows ascend and the comparison is strict, so ties keep the smaller
    // window; within a window Best() already prefers the earlier frame.
    if (!have || d.start.confidence > best_s.confidence) {
      best_s = d.start;
      result.window_start_s = w;
    }
    if (!have || d.end.confidence > best_e.confidence) {
      best_e = d.end;
      result.window_end_s = w;
    }
    have = true;
    result.windows.push_back(d);
  }

  result.f_s = std::min(best_s.frame_index, p);
  result.f_e = std::max(best_e.frame_index, p);
  result.t_s = video.Timestamp(result.f_s);
  result.t_e = video.Timestamp(result.f_e);
  result.confidence_start = best_s.confidence;
  result.confidence_end = best_e.confidence;

  const double duration = result.t_e - result.t_s;
  if (duration < 2.0 || duration > 20.0) {
    std::ostringstream w;
    w << "moment duration " << duration << " s is outside the typical 2-20 s range";
    result.warnings.push_back(w.str());
  }
  return result;
}

}  // namespace grab::temporal
