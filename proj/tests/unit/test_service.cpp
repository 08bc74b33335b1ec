#include <fstream>
#include <atomic>
#include <chrono>
#include <random>
#include <thread>

#include "doctest.h"
#include "grab/error.hpp"
#include "grab/service/http_server.hpp"
#include "grab/service/search_service.hpp"
#include "grab/store/manifest.hpp"
#include "httplib.h"
#include "json.hpp"
#include "test_util.hpp"

using namespace grab;
using namespace grab::service;
using nlohmann::json;

namespace {

constexpr std::size_t kDim = 8;

// Stand-in embedding provider: "wrong dim" answers with 3 components,
// "server error" with HTTP 500, anything else with e_0.
class MockProvider {
 public:
  MockProvider() {
    server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      ++calls;
      const auto text = json::parse(req.body).at("text").get<std::string>();
      if (text == "server error") {
        res.status = 500;
        return;
      }
      std::vector<float> v(text == "wrong dim" ? 3 : kDim, 0.f);
      v[0] = 1.f;
      res.set_content(json{{"embedding", v}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockProvider() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/embed"; }
  std::atomic<int> calls{0};

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

struct Corpus {
  grab::test::TempDir dir;
  std::vector<float> keyframes_v;

  // "v": 30 fps, 600 frames, sequence stride 6, keyframes every 100 frames.
  // "noseq": keyframes only.
  explicit Corpus(bool with_extra_video = false) { Write(with_extra_video); }

  void Write(bool with_extra_video) {
    std::mt19937_64 rng(11);
    store::CorpusManifest m;
    m.dim = kDim;
    m.base_dir = dir.path();
    store::VideoEntry v;
    v.video_id = "v";
    v.fps = 30;
    v.frame_count = 600;
    v.duration_s = 20;
    v.dim = kDim;
    v.embedding_file = "v.f32";
    for (std::int64_t f = 0; f < 600; f += 100) v.keyframes.push_back({f, f / 100, std::nullopt});
    keyframes_v = grab::test::RandomVectors(rng, v.keyframes.size(), kDim);
    store::WriteF32Blob(dir / "v.f32", keyframes_v);
    v.sequence_stride = 6;
    v.sequence_embedding_file = "v.seq.f32";
    store::WriteF32Blob(dir / "v.seq.f32", grab::test::RandomVectors(rng, 100, kDim));
    m.videos.push_back(v);

    store::VideoEntry n;
    n.video_id = "noseq";
    n.fps = 25;
    n.frame_count = 100;
    n.duration_s = 4;
    n.dim = kDim;
    n.embedding_file = "noseq.f32";
    n.keyframes = {{0, 0, std::nullopt}, {50, 1, std::nullopt}};
    store::WriteF32Blob(dir / "noseq.f32", grab::test::RandomVectors(rng, 2, kDim));
    m.videos.push_back(n);

    if (with_extra_video) {
      auto extra = n;
      extra.video_id = "extra";
      m.videos.push_back(extra);
    }
    store::SaveManifest(m, dir / "corpus.json");
  }
};

struct Harness {
  Corpus corpus;
  std::unique_ptr<MockProvider> provider;
  std::unique_ptr<SearchService> service;
  std::unique_ptr<HttpServer> server;
  std::thread thread;
  std::unique_ptr<httplib::Client> client;

  explicit Harness(bool with_provider = true) {
    ServiceConfig cfg;
    cfg.manifest = corpus.dir / "corpus.json";
    cfg.annotation_log = corpus.dir / "annotations.jsonl";
    if (with_provider) {
      provider = std::make_unique<MockProvider>();
      cfg.provider_url = provider->url();
    }
    service = std::make_unique<SearchService>(cfg);
    server = std::make_unique<HttpServer>(*service);
    const int port = server->Bind("127.0.0.1", 0);
    thread = std::thread([this] { server->Listen(); });
    for (int i = 0; i < 200 && !server->running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }
  ~Harness() {
    server->Stop();
    thread.join();
  }

  std::pair<int, json> Post(const std::string& path, const json& body) {
    auto res = client->Post(path, body.dump(), "application/json");
    REQUIRE(res);
    return {res->status, res->body.empty() ? json() : json::parse(res->body)};
  }
  std::pair<int, json> Get(const std::string& path) {
    auto res = client->Get(path);
    REQUIRE(res);
    return {res->status, res->body.empty() ? json() : json::parse(res->body)};
  }
  std::vector<float> Keyframe(std::size_t i) const {
    return {corpus.keyframes_v.begin() + i * kDim, corpus.keyframes_v.begin() + (i + 1) * kDim};
  }
};

std::string ErrorCodeOf(const json& j) { return j.at("error").at("code").get<std::string>(); }

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("status mapping and listen address") {
    CHECK(HttpStatusFor(ErrorCode::kInvalidInput) == 400);
    CHECK(HttpStatusFor(ErrorCode::kDimensionMismatch) == 422);
    CHECK(HttpStatusFor(ErrorCode::kConstraintViolation) == 422);
    CHECK(HttpStatusFor(ErrorCode::kNotFound) == 404);
    CHECK(HttpStatusFor(ErrorCode::kCapability) == 409);
    CHECK(HttpStatusFor(ErrorCode::kProviderUnavailable) == 503);
    CHECK(HttpStatusFor(ErrorCode::kProviderBadResponse) == 502);
    CHECK(ParseListenAddr("0.0.0.0:9000") == std::pair<std::string, int>{"0.0.0.0", 9000});
    CHECK_THROWS_AS(ParseListenAddr("nohost"), Error);
    CHECK_THROWS_AS(ParseListenAddr("h:99999"), Error);
  }

  TEST_CASE("search by embedding") {
    Harness h;
    auto [status, body] = h.Post("/api/v1/search", {{"query_embedding", h.Keyframe(2)}, {"top_k", 3}, {"rerank", false}});
    REQUIRE(status == 200);
    REQUIRE(body["hits"].size() == 3);
    CHECK(body["hits"][0]["video_id"] == "v");
    CHECK(body["hits"][0]["frame_index"] == 200);
    CHECK(body["hits"][0]["score"].get<double>() == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(body["hits"][0]["rank"] == 1);
    CHECK(body["metadata"]["reranked"] == false);
    CHECK(body["metadata"]["corpus_rows"] == 8);

    std::tie(status, body) = h.Post("/api/v1/search", {{"query_embedding", h.Keyframe(2)}, {"top_k", 5}});
    REQUIRE(status == 200);
    CHECK(body["metadata"]["reranked"] == true);
    CHECK(body["hits"].size() == 5);
    for (const auto& hit : body["hits"]) {
      CHECK(hit.contains("raw_rank"));
      CHECK(hit["s_final"].get<double>() ==
            doctest::Approx((hit["s1"].get<double>() + hit["s2"].get<double>()) / 2).epsilon(1e-5));
    }
  }

  TEST_CASE("search validation") {
    Harness h;
    auto [status, body] = h.Post("/api/v1/search", {{"query_embedding", h.Keyframe(0)}, {"query_text", "x"}});
    CHECK(status == 400);
    CHECK(ErrorCodeOf(body) == "invalid_input");
    std::tie(status, body) = h.Post("/api/v1/search", json::object());
    CHECK(status == 400);
    std::tie(status, body) = h.Post("/api/v1/search", {{"query_embedding", std::vector<float>(kDim + 1, 1.f)}});
    CHECK(status == 422);
    CHECK(ErrorCodeOf(body) == "dimension_mismatch");
    std::tie(status, body) = h.Post("/api/v1/search", {{"query_embedding", h.Keyframe(0)}, {"top_k", 0}});
    CHECK(status == 400);
    std::tie(status, body) = h.Post("/api/v1/search", {{"query_embedding", std::vector<float>(kDim, 0.f)}});
    CHECK(status == 400);
    auto raw = h.client->Post("/api/v1/search", "{not json", "application/json");
    REQUIRE(raw);
    CHECK(raw->status == 400);
  }

  TEST_CASE("text queries go through the provider once per text") {
    Harness h;
    auto [status, body] = h.Post("/api/v1/search", {{"query_text", "a red car"}, {"top_k", 2}});
    CHECK(status == 200);
    std::tie(status, body) = h.Post("/api/v1/search", {{"query_text", "a red car"}, {"top_k", 2}});
    CHECK(status == 200);
    CHECK(h.provider->calls == 1);
    std::tie(status, body) = h.Post("/api/v1/search", {{"query_text", "wrong dim"}});
    CHECK(status == 502);
    CHECK(ErrorCodeOf(body) == "provider_bad_response");
    std::tie(status, body) = h.Post("/api/v1/search", {{"query_text", "server error"}});
    CHECK(status == 503);
  }

  TEST_CASE("text queries without a provider") {
    Harness h(false);
    auto [status, body] = h.Post("/api/v1/search", {{"query_text", "anything"}});
    CHECK(status == 503);
    CHECK(ErrorCodeOf(body) == "provider_unavailable");
  }

  TEST_CASE("temporal endpoint") {
    Harness h;
    const auto q = h.Keyframe(1);
    auto [status, body] = h.Post("/api/v1/temporal", {{"pivot", {{"video_id", "v"}, {"frame_index", 300}}},
                                                      {"query_start_embedding", q},
                                                      {"query_end_embedding", q}});
    REQUIRE(status == 200);
    CHECK(body["f_s"].get<int>() <= 300);
    CHECK(body["f_e"].get<int>() >= 300);
    CHECK(body["t_s"].get<double>() == doctest::Approx(body["f_s"].get<double>() / 30));
    CHECK(body.contains("confidence_start"));
    CHECK(body.contains("window_used_s"));

    std::tie(status, body) = h.Post("/api/v1/temporal", {{"pivot", {{"video_id", "v"}, {"frame_index", 600}}},
                                                         {"query_start_embedding", q},
                                                         {"query_end_embedding", q}});
    CHECK(status == 404);
    std::tie(status, body) = h.Post("/api/v1/temporal", {{"pivot", {{"video_id", "nope"}, {"frame_index", 0}}},
                                                         {"query_start_embedding", q},
                                                         {"query_end_embedding", q}});
    CHECK(status == 404);
    std::tie(status, body) = h.Post("/api/v1/temporal", {{"pivot", {{"video_id", "noseq"}, {"frame_index", 10}}},
                                                         {"query_start_embedding", q},
                                                         {"query_end_embedding", q}});
    CHECK(status == 409);
    CHECK(ErrorCodeOf(body) == "capability");
    std::tie(status, body) = h.Post("/api/v1/temporal", {{"pivot", {{"video_id", "v"}, {"frame_index", 300}}},
                                                         {"query_text", "It starts. It ends."}});
    CHECK(status == 200);
    CHECK(h.provider->calls == 2);
  }

  TEST_CASE("lambda_t = 0 over HTTP matches the library call") {
    Harness h;
    const auto q = h.Keyframe(3);
    auto [status, body] =
        h.Post("/api/v1/temporal", {{"pivot", {{"video_id", "v"}, {"frame_index", 300}}},
                                    {"query_start_embedding", q},
                                    {"query_end_embedding", q},
                                    {"params", {{"windows_s", {5}}, {"lambda_s", 1.0}, {"lambda_t", 0.0}}}});
    REQUIRE(status == 200);
    const auto snap = h.service->snapshot();
    const auto want = temporal::TemporalSearch(q, q, {"v", 300}, *snap->store, temporal::AbtsParams::Make({5}, 1, 0));
    CHECK(body["f_s"] == want.f_s);
    CHECK(body["f_e"] == want.f_e);
  }

  TEST_CASE("neighbors") {
    Harness h;
    auto [status, body] = h.Get("/api/v1/videos/v/neighbors?frame=300&span=60");
    REQUIRE(status == 200);
    REQUIRE(body["frames"].size() == 21);
    CHECK(body["frames"][0]["frame_index"] == 240);
    CHECK(body["frames"][20]["frame_index"] == 360);
    CHECK(body["frames"][10]["is_keyframe"] == true);
    CHECK(body["frames"][10]["timestamp_s"].get<double>() == doctest::Approx(10.0));
    std::tie(status, body) = h.Get("/api/v1/videos/v/neighbors?frame=300");
    REQUIRE(status == 200);
    CHECK(body["frames"].size() == 1);
    std::tie(status, body) = h.Get("/api/v1/videos/v/neighbors?frame=301&span=0");
    REQUIRE(status == 200);
    CHECK(body["frames"][0]["frame_index"] == 300);
    std::tie(status, body) = h.Get("/api/v1/videos/v/neighbors?frame=600");
    CHECK(status == 404);
    std::tie(status, body) = h.Get("/api/v1/videos/zzz/neighbors?frame=1");
    CHECK(status == 404);
    std::tie(status, body) = h.Get("/api/v1/videos/v/neighbors?frame=1&span=-2");
    CHECK(status == 400);
  }

  TEST_CASE("annotations are ordered and durable") {
    std::filesystem::path log;
    {
      Harness h;
      log = h.corpus.dir / "annotations.jsonl";
      auto [status, body] = h.Post("/api/v1/annotations",
                                   {{"session_id", "s1"}, {"query_text", "q"}, {"video_id", "v"}, {"f_s", 10}, {"f_e", 20}});
      CHECK(status == 201);
      CHECK(body["id"] == 1);
      std::tie(status, body) = h.Post("/api/v1/annotations",
                                      {{"session_id", "s2"}, {"video_id", "v"}, {"f_s", 30}, {"f_e", 40}});
      CHECK(status == 201);
      std::tie(status, body) = h.Post("/api/v1/annotations", {{"video_id", "v"}, {"f_s", 50}, {"f_e", 40}});
      CHECK(status == 422);
      CHECK(ErrorCodeOf(body) == "constraint_violation");
      std::tie(status, body) = h.Post("/api/v1/annotations", {{"video_id", "nope"}, {"f_s", 1}, {"f_e", 2}});
      CHECK(status == 404);

      std::tie(status, body) = h.Get("/api/v1/annotations");
      REQUIRE(body["annotations"].size() == 2);
      CHECK(body["annotations"][0]["f_s"] == 10);
      CHECK(body["annotations"][1]["f_s"] == 30);
      CHECK(body["annotations"][0]["created_at_ms"] <= body["annotations"][1]["created_at_ms"]);
      std::tie(status, body) = h.Get("/api/v1/annotations?session_id=s2");
      CHECK(body["annotations"].size() == 1);

      // a fresh log over the same file sees both records
      AnnotationLog reopened(log);
      REQUIRE(reopened.List().size() == 2);
      CHECK(reopened.List()[1].session_id == "s2");
    }
  }

  TEST_CASE("torn final line is ignored") {
    grab::test::TempDir dir;
    {
      AnnotationLog log(dir / "a.jsonl");
      log.Append({0, "s", "q", "v", 1, 2, "", 0});
    }
    {
      std::ofstream out(dir / "a.jsonl", std::ios::app);
      out << "{\"id\": 2, \"sess";
    }
    AnnotationLog log(dir / "a.jsonl");
    CHECK(log.List().size() == 1);
    const auto r = log.Append({0, "s", "q", "v", 3, 4, "", 0});
    CHECK(r.id == 2);
  }

  TEST_CASE("identical requests give identical responses") {
    Harness h;
    const json req{{"query_embedding", h.Keyframe(4)}, {"top_k", 6}};
    auto [s1, a] = h.Post("/api/v1/search", req);
    auto [s2, b] = h.Post("/api/v1/search", req);
    REQUIRE(s1 == 200);
    REQUIRE(s2 == 200);
    a["metadata"].erase("took_ms");
    b["metadata"].erase("took_ms");
    CHECK(a.dump() == b.dump());
  }

  TEST_CASE("reload picks up a changed manifest") {
    Harness h;
    auto [status, body] = h.Get("/api/v1/health");
    REQUIRE(status == 200);
    CHECK(body["videos"] == 2);
    h.corpus.Write(true);
    std::tie(status, body) = h.Post("/api/v1/reload", json::object());
    REQUIRE(status == 200);
    CHECK(body["videos"] == 3);
    CHECK(body["generation"] == 2);
    std::tie(status, body) = h.Get("/api/v1/health");
    CHECK(body["videos"] == 3);
  }

  TEST_CASE("in-memory service cannot reload") {
    ServiceConfig cfg;
    grab::test::TempDir dir;
    cfg.annotation_log = dir / "a.jsonl";
    SearchService svc(cfg, grab::test::FlatStore({1.f, 0.f, 0.f, 1.f}, 2));
    const auto snap = svc.snapshot();
    CHECK(svc.Search(*snap, std::vector<float>{1.f, 0.f}, 1, false, {}).hits.at(0).hit.frame_index == 0);
    try {
      svc.Reload();
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kCapability);
    }
  }
}
