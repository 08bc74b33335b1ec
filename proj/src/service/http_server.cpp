#include "grab/service/http_server.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "grab/simd/kernels.hpp"
#include "grab/service/wire.hpp"
#include "httplib.h"

namespace grab::service {

using nlohmann::json;
using nlohmann::ordered_json;

int HttpStatusFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return 400;
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kConstraintViolation: return 422;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kCapability: return 409;
    case ErrorCode::kProviderUnavailable: return 503;
    case ErrorCode::kProviderBadResponse: return 502;
    default: return 500;
  }
}

std::pair<std::string, int> ParseListenAddr(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCode::kInvalidInput, "listen address must be host:port");
  std::string host = addr.substr(0, colon);
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(addr.substr(colon + 1), &used);
    if (used != addr.size() - colon - 1) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidInput, "bad port in listen address '" + addr + "'");
  }
  if (port < 0 || port > 65535) throw Error(ErrorCode::kInvalidInput, "port out of range in '" + addr + "'");
  return {host.empty() ? "0.0.0.0" : host, port};
}

namespace {

void Reply(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void ReplyError(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  Reply(res, status, ordered_json{{"error", {{"code", code}, {"message", message}}}});
}

template <typename F>
httplib::Server::Handler Guard(F&& body) {
  return [body = std::forward<F>(body)](const httplib::Request& req, httplib::Response& res) {
    try {
      body(req, res);
    } catch (const Error& e) {
      ReplyError(res, HttpStatusFor(e.code()), ErrorCodeName(e.code()), e.what());
    } catch (const json::exception& e) {
      ReplyError(res, 400, ErrorCodeName(ErrorCode::kInvalidInput), std::string("malformed request: ") + e.what());
    } catch (const std::exception& e) {
      ReplyError(res, 500, "internal", e.what());
    }
  };
}

json ParseBody(const httplib::Request& req) {
  json body;
  try {
    body = json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kInvalidInput, std::string("request body is not valid JSON: ") + e.what());
  }
  if (!body.is_object()) throw Error(ErrorCode::kInvalidInput, "request body must be a JSON object");
  return body;
}

bool Has(const json& j, const char* key) { return j.contains(key) && !j.at(key).is_null(); }

std::int64_t QueryInt(const httplib::Request& req, const char* name, std::optional<std::int64_t> fallback) {
  if (!req.has_param(name)) {
    if (fallback) return *fallback;
    throw Error(ErrorCode::kInvalidInput, std::string("missing query parameter '") + name + "'");
  }
  const auto v = req.get_param_value(name);
  try {
    std::size_t used = 0;
    const auto x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidInput, std::string("query parameter '") + name + "' must be an integer");
  }
}

std::string ContentType(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".png") return "image/png";
  if (ext == ".webp") return "image/webp";
  if (ext == ".pgm") return "image/x-portable-graymap";
  return "application/octet-stream";
}

}  // namespace

struct HttpServer::Impl {
  SearchService& svc;
  httplib::Server server;

  explicit Impl(SearchService& s) : svc(s) { Routes(); }

  // Embedding from "<prefix>embedding" or "<prefix>text".
  std::optional<std::vector<float>> Resolve(const json& body, const std::string& prefix, std::size_t dim) {
    const auto emb_key = prefix + "embedding";
    const auto text_key = prefix + "text";
    const bool has_emb = Has(body, emb_key.c_str());
    const bool has_text = Has(body, text_key.c_str());
    if (has_emb && has_text) {
      throw Error(ErrorCode::kInvalidInput, "supply only one of " + emb_key + " and " + text_key);
    }
    if (has_emb) return EmbeddingFromJson(body.at(emb_key), emb_key.c_str());
    if (has_text) {
      const auto& t = body.at(text_key);
      if (!t.is_string() || t.get<std::string>().empty()) {
        throw Error(ErrorCode::kInvalidInput, text_key + " must be a non-empty string");
      }
      return svc.EmbedText(t.get<std::string>(), dim);
    }
    return std::nullopt;
  }

  void Routes() {
    server.Post("/api/v1/search", Guard([this](const httplib::Request& req, httplib::Response& res) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto body = ParseBody(req);
      const auto snap = svc.snapshot();
      const auto dim = snap->store->dim();
      auto query = Resolve(body, "query_", dim);
      if (!query) throw Error(ErrorCode::kInvalidInput, "supply exactly one of query_text and query_embedding");
      const auto top_k_signed = body.value("top_k", std::int64_t{20});
      if (top_k_signed < 1 || top_k_signed > 500) throw Error(ErrorCode::kInvalidInput, "top_k must be in [1, 500]");
      const bool do_rerank = body.value("rerank", true);
      rerank::RerankParams params;
      if (Has(body, "rerank_params")) {
        const auto& rp = body.at("rerank_params");
        params.refine_k = rp.value("refine_k", params.refine_k);
        params.expand_m = rp.value("expand_m", params.expand_m);
      }
      const auto outcome = svc.Search(*snap, *query, static_cast<std::size_t>(top_k_signed), do_rerank, params);

      ordered_json hits = ordered_json::array();
      for (const auto& h : outcome.hits) {
        std::optional<std::string> thumb;
        if (snap->manifest.thumbnail_template) thumb = ThumbnailUrl(h.hit.video_id, h.hit.frame_index);
        hits.push_back(HitToJson(h, *snap->store, outcome.reranked, thumb));
      }
      ordered_json meta{{"index_mode", snap->index ? IndexModeName(snap->index->mode()) : "none"},
                        {"reranked", outcome.reranked},
                        {"candidates", outcome.candidates},
                        {"top_k", top_k_signed},
                        {"dim", dim},
                        {"corpus_rows", snap->store->rows()}};
      if (outcome.reranked) meta["rerank_params"] = {{"refine_k", params.refine_k}, {"expand_m", params.expand_m}};
      meta["took_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      Reply(res, 200, ordered_json{{"hits", std::move(hits)}, {"metadata", std::move(meta)}});
    }));

    server.Post("/api/v1/temporal", Guard([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = ParseBody(req);
      const auto snap = svc.snapshot();
      const auto dim = snap->store->dim();
      if (!Has(body, "pivot")) throw Error(ErrorCode::kInvalidInput, "missing pivot");
      const auto& pj = body.at("pivot");
      temporal::PivotRef pivot{pj.at("video_id").get<std::string>(), pj.at("frame_index").get<std::int64_t>()};
      snap->store->GetVideo(pivot.video_id);  // 404 before any provider call

      auto q_start = Resolve(body, "query_start_", dim);
      auto q_end = Resolve(body, "query_end_", dim);
      if ((!q_start || !q_end) && Has(body, "query_text")) {
        std::optional<std::size_t> hint;
        if (Has(body, "split_hint")) {
          const auto h = body.at("split_hint").get<std::int64_t>();
          if (h < 0) throw Error(ErrorCode::kInvalidInput, "split_hint must be >= 0");
          hint = static_cast<std::size_t>(h);
        }
        const auto [start_text, end_text] = temporal::SplitQuery(body.at("query_text").get<std::string>(), hint);
        if (!q_start) q_start = svc.EmbedText(start_text, dim);
        if (!q_end) q_end = svc.EmbedText(end_text, dim);
      }
      if (!q_start || !q_end) {
        throw Error(ErrorCode::kInvalidInput,
                    "supply query_start_embedding/text and query_end_embedding/text, or query_text");
      }
      const auto params = AbtsParamsFromJson(body.contains("params") ? body.at("params") : json());
      const auto moment = svc.Temporal(*snap, *q_start, *q_end, pivot, params);
      Reply(res, 200, MomentToJson(moment));
    }));

    server.Get(R"(/api/v1/videos/([^/]+)/neighbors)", Guard([this](const httplib::Request& req, httplib::Response& res) {
      const auto snap = svc.snapshot();
      const std::string video_id = req.matches[1];
      const auto frame = QueryInt(req, "frame", std::nullopt);
      const auto span = QueryInt(req, "span", 0);
      const auto frames = svc.Neighbors(*snap, video_id, frame, span);
      const bool thumbs = snap->manifest.thumbnail_template.has_value();
      ordered_json list = ordered_json::array();
      for (const auto& f : frames) {
        ordered_json e{{"frame_index", f.frame_index}, {"timestamp_s", f.timestamp_s}, {"is_keyframe", f.is_keyframe}};
        if (thumbs && f.is_keyframe) e["thumbnail"] = ThumbnailUrl(video_id, f.frame_index);
        list.push_back(std::move(e));
      }
      Reply(res, 200, ordered_json{{"video_id", video_id}, {"frame", frame}, {"span", span}, {"frames", std::move(list)}});
    }));

    server.Post("/api/v1/annotations", Guard([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = ParseBody(req);
      AnnotationRecord r;
      r.session_id = body.value("session_id", std::string{});
      r.query_text = body.value("query_text", std::string{});
      r.video_id = body.at("video_id").get<std::string>();
      r.f_s = body.at("f_s").get<std::int64_t>();
      r.f_e = body.at("f_e").get<std::int64_t>();
      r.answer_text = body.value("answer_text", std::string{});
      svc.snapshot()->store->GetVideo(r.video_id);
      const auto stored = svc.annotations().Append(std::move(r));
      Reply(res, 201, AnnotationToJson(stored));
    }));

    server.Get("/api/v1/annotations", Guard([this](const httplib::Request& req, httplib::Response& res) {
      std::optional<std::string> session;
      if (req.has_param("session_id")) session = req.get_param_value("session_id");
      json list = json::array();
      for (const auto& r : svc.annotations().List(session)) list.push_back(AnnotationToJson(r));
      Reply(res, 200, ordered_json{{"annotations", std::move(list)}});
    }));

    server.Post("/api/v1/reload", Guard([this](const httplib::Request&, httplib::Response& res) {
      const auto snap = svc.Reload();
      Reply(res, 200, ordered_json{{"generation", snap->generation},
                                   {"videos", snap->store->videos().size()},
                                   {"keyframes", snap->store->rows()}});
    }));

    server.Get("/api/v1/health", Guard([this](const httplib::Request&, httplib::Response& res) {
      const auto snap = svc.snapshot();
      Reply(res, 200, ordered_json{{"status", "ok"},
                                   {"generation", snap->generation},
                                   {"videos", snap->store->videos().size()},
                                   {"keyframes", snap->store->rows()},
                                   {"dim", snap->store->dim()},
                                   {"index_mode", snap->index ? IndexModeName(snap->index->mode()) : "none"},
                                   {"simd", simd::IsaName(simd::ActiveIsa())}});
    }));

    server.Get(R"(/thumbnails/([^/]+)/(\d+))", Guard([this](const httplib::Request& req, httplib::Response& res) {
      const auto snap = svc.snapshot();
      const std::string video_id = req.matches[1];
      std::int64_t frame = 0;
      try {
        frame = std::stoll(req.matches[2]);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kInvalidInput, "bad frame index");
      }
      const auto path = svc.ThumbnailPath(*snap, video_id, frame);
      if (!path) throw Error(ErrorCode::kNotFound, "no thumbnail for " + video_id + "/" + std::to_string(frame));
      std::ifstream in(*path, std::ios::binary);
      if (!in) throw Error(ErrorCode::kNotFound, "thumbnail file missing: " + path->filename().string());
      std::ostringstream data;
      data << in.rdbuf();
      res.status = 200;
      res.set_content(data.str(), ContentType(*path));
    }));

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) {
        ReplyError(res, res.status, res.status == 404 ? "not_found" : "http_error",
                   "HTTP " + std::to_string(res.status));
      }
    });
  }
};

HttpServer::HttpServer(SearchService& service) : impl_(std::make_unique<Impl>(service)) {}
HttpServer::~HttpServer() { Stop(); }

int HttpServer::Bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::kIo, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::Listen() { impl_->server.listen_after_bind(); }
void HttpServer::Stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}
bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace grab::service
