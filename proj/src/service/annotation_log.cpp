#include "grab/service/annotation_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>

#include "grab/error.hpp"

namespace grab::service {

nlohmann::json AnnotationToJson(const AnnotationRecord& r) {
  return {{"id", r.id},           {"session_id", r.session_id}, {"query_text", r.query_text},
          {"video_id", r.video_id}, {"f_s", r.f_s},             {"f_e", r.f_e},
          {"answer_text", r.answer_text}, {"created_at_ms", r.created_at_ms}};
}

AnnotationRecord AnnotationFromJson(const nlohmann::json& j) {
  AnnotationRecord r;
  r.id = j.value("id", std::uint64_t{0});
  r.session_id = j.value("session_id", std::string{});
  r.query_text = j.value("query_text", std::string{});
  r.video_id = j.at("video_id").get<std::string>();
  r.f_s = j.at("f_s").get<std::int64_t>();
  r.f_e = j.at("f_e").get<std::int64_t>();
  r.answer_text = j.value("answer_text", std::string{});
  r.created_at_ms = j.value("created_at_ms", std::int64_t{0});
  return r;
}

AnnotationLog::AnnotationLog(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      auto r = AnnotationFromJson(nlohmann::json::parse(line));
      next_id_ = std::max(next_id_, r.id + 1);
      last_ms_ = std::max(last_ms_, r.created_at_ms);
      records_.push_back(std::move(r));
    } catch (const std::exception&) {
      // torn tail from an interrupted append
    }
  }
}

AnnotationRecord AnnotationLog::Append(AnnotationRecord r) {
  if (r.f_s < 0 || r.f_e < 0) throw Error(ErrorCode::kInvalidInput, "f_s and f_e must be non-negative");
  if (r.f_s > r.f_e) {
    throw Error(ErrorCode::kConstraintViolation,
                "f_s (" + std::to_string(r.f_s) + ") must not exceed f_e (" + std::to_string(r.f_e) + ")");
  }
  std::lock_guard lock(mu_);
  const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  r.id = next_id_;
  r.created_at_ms = std::max<std::int64_t>(now, last_ms_);
  const std::string line = AnnotationToJson(r).dump() + "\n";

  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorCode::kIo, "open " + path_.string() + ": " + std::strerror(errno));
  const char* p = line.data();
  std::size_t left = line.size();
  while (left > 0) {
    const ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw Error(ErrorCode::kIo, "write " + path_.string() + ": " + std::strerror(err));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    const int err = errno;
    ::close(fd);
    throw Error(ErrorCode::kIo, "fsync " + path_.string() + ": " + std::strerror(err));
  }
  ::close(fd);

  ++next_id_;
  last_ms_ = r.created_at_ms;
  records_.push_back(r);
  return r;
}

std::vector<AnnotationRecord> AnnotationLog::List(const std::optional<std::string>& session_id) const {
  std::lock_guard lock(mu_);
  if (!session_id) return records_;
  std::vector<AnnotationRecord> out;
  for (const auto& r : records_) {
    if (r.session_id == *session_id) out.push_back(r);
  }
  return out;
}

}  // namespace grab::service
