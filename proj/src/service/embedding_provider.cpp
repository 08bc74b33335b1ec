#include "grab/service/embedding_provider.hpp"

#include <cmath>

#include "grab/error.hpp"
#include "grab/simd/kernels.hpp"
#include "httplib.h"
#include "json.hpp"

namespace grab::service {

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string url, std::chrono::milliseconds timeout)
    : url_(std::move(url)), timeout_(timeout) {
  const auto scheme_end = url_.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kInvalidInput, "provider url needs a scheme: '" + url_ + "'");
  }
  const auto path_start = url_.find('/', scheme_end + 3);
  origin_ = url_.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url_.substr(path_start);
}

std::vector<float> HttpEmbeddingProvider::Embed(const std::string& text, std::size_t dim) {
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(text); it != cache_.end() && it->second.size() == dim) return it->second;
  }

  httplib::Client client(origin_);
  const auto secs = static_cast<time_t>(timeout_.count() / 1000);
  const auto usecs = static_cast<time_t>((timeout_.count() % 1000) * 1000);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  ++calls_;
  const auto res = client.Post(path_, nlohmann::json{{"text", text}}.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::kProviderUnavailable,
                "embedding provider unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status >= 500) {
    throw Error(ErrorCode::kProviderUnavailable, "embedding provider returned HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::kProviderBadResponse, "embedding provider returned HTTP " + std::to_string(res->status));
  }

  std::vector<float> v;
  try {
    const auto body = nlohmann::json::parse(res->body);
    v = body.at("embedding").get<std::vector<float>>();
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kProviderBadResponse, std::string("malformed provider response: ") + e.what());
  }
  if (v.size() != dim) {
    throw Error(ErrorCode::kProviderBadResponse, "provider returned dimension " + std::to_string(v.size()) +
                                                     ", corpus dimension is " + std::to_string(dim));
  }
  for (float x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kProviderBadResponse, "provider returned a non-finite value");
  }
  if (simd::NormalizeInPlace(v) == 0.f) {
    throw Error(ErrorCode::kProviderBadResponse, "provider returned a zero vector");
  }
  std::lock_guard lock(mu_);
  cache_[text] = v;
  return v;
}

}  // namespace grab::service
