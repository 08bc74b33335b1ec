#include "grab/service/wire.hpp"

#include <cctype>

#include "grab/error.hpp"

namespace grab::service {

nlohmann::ordered_json HitToJson(const rerank::RerankedHit& h, const store::EmbeddingStore& store, bool reranked,
                                 const std::optional<std::string>& thumbnail_url) {
  const auto& info = store.row_info(h.hit.row);
  nlohmann::ordered_json j;
  j["rank"] = h.hit.rank;
  j["video_id"] = h.hit.video_id;
  j["frame_index"] = h.hit.frame_index;
  j["timestamp_s"] = info.timestamp_s;
  j["shot_id"] = info.shot_id;
  j["score"] = h.hit.score;
  if (reranked) {
    j["raw_rank"] = h.raw_rank;
    j["s1"] = h.s1;
    j["s2"] = h.s2;
    j["s_final"] = h.s_final;
  }
  if (thumbnail_url) j["thumbnail"] = *thumbnail_url;
  return j;
}

namespace {

nlohmann::ordered_json CandidateToJson(const temporal::BoundaryCandidate& c) {
  return {{"frame_index", c.frame_index},
          {"similarity", c.similarity},
          {"stability", c.stability},
          {"confidence", c.confidence}};
}

}  // namespace

nlohmann::ordered_json MomentToJson(const temporal::MomentResult& m) {
  nlohmann::ordered_json j;
  j["video_id"] = m.video_id;
  j["pivot_frame"] = m.pivot_frame;
  j["f_s"] = m.f_s;
  j["f_e"] = m.f_e;
  j["t_s"] = m.t_s;
  j["t_e"] = m.t_e;
  j["confidence_start"] = m.confidence_start;
  j["confidence_end"] = m.confidence_end;
  j["window_used_s"] = {{"start", m.window_start_s}, {"end", m.window_end_s}};
  j["warnings"] = m.warnings;
  auto windows = nlohmann::ordered_json::array();
  for (const auto& w : m.windows) {
    windows.push_back({{"window_s", w.window_s},
                       {"start_candidates", w.start_candidates},
                       {"end_candidates", w.end_candidates},
                       {"start", CandidateToJson(w.start)},
                       {"end", CandidateToJson(w.end)}});
  }
  j["windows"] = std::move(windows);
  return j;
}

std::vector<float> EmbeddingFromJson(const nlohmann::json& j, const char* field) {
  if (!j.is_array() || j.empty()) {
    throw Error(ErrorCode::kInvalidInput, std::string(field) + " must be a non-empty array of numbers");
  }
  std::vector<float> v;
  v.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw Error(ErrorCode::kInvalidInput, std::string(field) + " must contain only numbers");
    v.push_back(x.get<float>());
  }
  return v;
}

temporal::AbtsParams AbtsParamsFromJson(const nlohmann::json& j) {
  temporal::AbtsParams d;
  if (!j.is_object()) {
    if (j.is_null()) return d;
    throw Error(ErrorCode::kInvalidInput, "params must be an object");
  }
  try {
    auto windows = j.contains("windows_s") ? j.at("windows_s").get<std::vector<double>>() : d.windows_s;
    const double ls = j.value("lambda_s", d.lambda_s);
    // A lone lambda_t override implies lambda_s = 1 - lambda_t.
    const double lt = j.value("lambda_t", d.lambda_t);
    const double ls_eff = j.contains("lambda_s") || !j.contains("lambda_t") ? ls : 1.0 - lt;
    const int radius = j.value("neighborhood_radius", d.neighborhood_radius);
    return temporal::AbtsParams::Make(std::move(windows), ls_eff, lt, radius);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidInput, std::string("bad temporal params: ") + e.what());
  }
}

std::string ThumbnailUrl(const std::string& video_id, std::int64_t frame_index) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string id;
  for (unsigned char c : video_id) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      id += static_cast<char>(c);
    } else {
      id += '%';
      id += kHex[c >> 4];
      id += kHex[c & 15];
    }
  }
  return "/thumbnails/" + id + "/" + std::to_string(frame_index);
}

}  // namespace grab::service
