#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace grab::service {

struct AnnotationRecord {
  std::uint64_t id = 0;
  std::string session_id;
  std::string query_text;
  std::string video_id;
  std::int64_t f_s = 0;
  std::int64_t f_e = 0;
  std::string answer_text;
  std::int64_t created_at_ms = 0;  // unix epoch milliseconds, non-decreasing in log order
};

nlohmann::json AnnotationToJson(const AnnotationRecord& r);
AnnotationRecord AnnotationFromJson(const nlohmann::json& j);

// Append-only JSONL log. Appends are serialized and fsync'ed before Append
// returns, so an acknowledged record survives a crash. Existing records are
// loaded on open; a torn final line (crash mid-write) is ignored.
class AnnotationLog {
 public:
  explicit AnnotationLog(std::filesystem::path path);

  // Assigns id and created_at. Throws kConstraintViolation if f_s > f_e,
  // kInvalidInput on negative frames, kIo on write failure.
  AnnotationRecord Append(AnnotationRecord record);

  std::vector<AnnotationRecord> List(const std::optional<std::string>& session_id = std::nullopt) const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::vector<AnnotationRecord> records_;
  std::uint64_t next_id_ = 1;
  std::int64_t last_ms_ = 0;
};

}  // namespace grab::service
