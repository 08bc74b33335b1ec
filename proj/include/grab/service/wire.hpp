#pragma once

// JSON encodings shared by the HTTP API and the CLI.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "grab/rerank/rerank.hpp"
#include "grab/store/embedding_store.hpp"
#include "grab/temporal/abts.hpp"

namespace grab::service {

nlohmann::ordered_json HitToJson(const rerank::RerankedHit& hit, const store::EmbeddingStore& store, bool reranked,
                                 const std::optional<std::string>& thumbnail_url = std::nullopt);
nlohmann::ordered_json MomentToJson(const temporal::MomentResult& moment);

// Float array; throws kInvalidInput on anything else.
std::vector<float> EmbeddingFromJson(const nlohmann::json& j, const char* field);

// Defaults overridden by any of windows_s, lambda_s, lambda_t,
// neighborhood_radius present in `j`; lambdas are renormalized.
temporal::AbtsParams AbtsParamsFromJson(const nlohmann::json& j);

std::string ThumbnailUrl(const std::string& video_id, std::int64_t frame_index);

}  // namespace grab::service
