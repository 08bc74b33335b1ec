#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace grab::service {

// Turns query text into a unit-length embedding of the corpus dimension.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // Throws kProviderUnavailable (transport failure, timeout, 5xx) or
  // kProviderBadResponse (malformed body, wrong dimension, zero vector).
  virtual std::vector<float> Embed(const std::string& text, std::size_t dim) = 0;
};

// POSTs {"text": ...} to `url` and expects {"embedding": [...]}. Valid
// responses are cached by text, so repeated queries cost one call.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(std::string url,
                                 std::chrono::milliseconds timeout = std::chrono::seconds(10));

  std::vector<float> Embed(const std::string& text, std::size_t dim) override;

  std::size_t calls() const { return calls_.load(); }
  const std::string& url() const { return url_; }

 private:
  std::string url_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;
  std::chrono::milliseconds timeout_;
  std::atomic<std::size_t> calls_{0};
  std::mutex mu_;
  std::unordered_map<std::string, std::vector<float>> cache_;
};

}  // namespace grab::service
