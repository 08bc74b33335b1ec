#pragma once

#include <memory>
#include <string>

#include "grab/error.hpp"
#include "grab/service/search_service.hpp"

namespace grab::service {

int HttpStatusFor(ErrorCode code);

// JSON API over SearchService:
//   POST /api/v1/search
//   POST /api/v1/temporal
//   GET  /api/v1/videos/{id}/neighbors?frame=F&span=S
//   POST /api/v1/annotations, GET /api/v1/annotations?session_id=...
//   POST /api/v1/reload, GET /api/v1/health
//   GET  /thumbnails/{video_id}/{frame_index}
// Errors are {"error": {"code", "message"}}.
class HttpServer {
 public:
  explicit HttpServer(SearchService& service);
  ~HttpServer();

  // Binds host:port (port 0 picks a free port); returns the bound port.
  int Bind(const std::string& host, int port);
  void Listen();  // blocks until Stop()
  void Stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Splits "host:port"; throws kInvalidInput.
std::pair<std::string, int> ParseListenAddr(const std::string& addr);

}  // namespace grab::service
