// grab: operator CLI for ingest, indexing, search, temporal search, serving
// and the synthetic evaluation harness.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "grab/error.hpp"
#include "grab/eval/eval.hpp"
#include "grab/index/ann_index.hpp"
#include "grab/ingest/ingest.hpp"
#include "grab/rerank/rerank.hpp"
#include "grab/service/http_server.hpp"
#include "grab/service/search_service.hpp"
#include "grab/service/wire.hpp"
#include "grab/simd/kernels.hpp"
#include "grab/store/embedding_store.hpp"
#include "grab/temporal/abts.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

fs::path ManifestPath(const std::string& corpus) {
  fs::path p = corpus;
  if (fs::is_directory(p)) p /= grab::ingest::Catalog::kManifestName;
  return p;
}

std::string DefaultCorpus() {
  const char* v = std::getenv("GRAB_MANIFEST");
  return v ? v : "";
}

// JSON array (".json") or raw little-endian float32.
std::vector<float> ReadVectorFile(const fs::path& path) {
  if (path.extension() == ".json") {
    std::ifstream in(path);
    if (!in) throw grab::Error(grab::ErrorCode::kIo, "cannot open " + path.string());
    return grab::service::EmbeddingFromJson(json::parse(in), path.string().c_str());
  }
  return grab::store::ReadF32Blob(path);
}

std::vector<double> ParseWindows(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw grab::Error(grab::ErrorCode::kInvalidInput, "bad window value '" + item + "'");
    }
  }
  return out;
}

grab::service::HttpServer* g_server = nullptr;
void OnSignal(int) {
  if (g_server) g_server->Stop();
}

int PrintReport(const grab::eval::EvalReport& report, bool as_json) {
  if (as_json) {
    std::cout << report.ToJson().dump(2) << "\n";
  } else {
    std::cout << report.Summary() << "\n" << report.metrics.dump() << "\n";
  }
  return report.bar_met ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grab: video moment retrieval engine"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Select and deduplicate keyframes into a corpus directory");
  std::string ingest_manifest, ingest_out = "corpus";
  double tau = 0.8;
  std::int64_t fallback_len = 120;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  ingest->add_option("--manifest", ingest_manifest, "Source manifest (JSON)")->required();
  ingest->add_option("--out", ingest_out, "Corpus directory (created or updated)");
  ingest->add_option("--tau", tau, "Near-duplicate similarity threshold")->capture_default_str();
  ingest->add_option("--fallback-shot-len", fallback_len, "Shot length when no shot file is given")->capture_default_str();
  ingest->add_option("--threads", threads, "Worker threads");

  // build-index
  auto* build = app.add_subcommand("build-index", "Build and save a search index");
  std::string corpus = DefaultCorpus(), mode_name = "exact", index_out = "index.grabidx";
  grab::index::GraphParams graph;
  build->add_option("--corpus", corpus, "Corpus directory or corpus.json")->required(corpus.empty());
  build->add_option("--mode", mode_name, "exact | approx")->capture_default_str();
  build->add_option("--out", index_out, "Index file")->capture_default_str();
  build->add_option("--max-degree", graph.max_degree)->capture_default_str();
  build->add_option("--construction-beam", graph.construction_beam)->capture_default_str();
  build->add_option("--query-beam", graph.query_beam)->capture_default_str();
  build->add_option("--seed", graph.seed)->capture_default_str();

  // search
  auto* search = app.add_subcommand("search", "Top-K search for a query embedding");
  std::string query_file, index_file;
  std::size_t top = 20, pool = 100;
  bool do_rerank = false, as_json = false;
  grab::rerank::RerankParams rparams;
  search->add_option("--corpus", corpus, "Corpus directory or corpus.json")->required(corpus.empty());
  search->add_option("--query-embedding", query_file, "Query vector (.json array or raw f32le)")->required();
  search->add_option("--top", top, "Results to return")->capture_default_str();
  search->add_option("--index", index_file, "Prebuilt index file");
  search->add_option("--mode", mode_name, "Index mode when no index file is given")->capture_default_str();
  search->add_flag("--rerank", do_rerank, "Rerank the top candidates");
  search->add_option("--candidates", pool, "Candidates fed to reranking")->capture_default_str();
  search->add_option("--refine-k", rparams.refine_k)->capture_default_str();
  search->add_option("--expand-m", rparams.expand_m)->capture_default_str();
  search->add_flag("--json", as_json, "JSON output");

  // temporal
  auto* temporal = app.add_subcommand("temporal", "Locate moment boundaries around a pivot frame");
  std::string video_id, q_start_file, q_end_file, windows_csv = "10,15,20";
  std::int64_t pivot_frame = 0;
  double lambda_s = 0.7, lambda_t = 0.3;
  int radius = 2;
  temporal->add_option("--corpus", corpus, "Corpus directory or corpus.json")->required(corpus.empty());
  temporal->add_option("--video", video_id)->required();
  temporal->add_option("--pivot-frame", pivot_frame)->required();
  temporal->add_option("--query-start-emb", q_start_file)->required();
  temporal->add_option("--query-end-emb", q_end_file)->required();
  temporal->add_option("--windows", windows_csv, "Window half-ranges in seconds")->capture_default_str();
  temporal->add_option("--lambda-s", lambda_s)->capture_default_str();
  temporal->add_option("--lambda-t", lambda_t)->capture_default_str();
  temporal->add_option("--radius", radius, "Stability neighbourhood radius")->capture_default_str();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  auto cfg = grab::service::ServiceConfig::FromEnvironment();
  std::string serve_manifest = cfg.manifest.string(), serve_mode = std::string(grab::index::IndexModeName(cfg.index_mode));
  std::string serve_index = cfg.index_file ? cfg.index_file->string() : "";
  std::string serve_log = cfg.annotation_log.string();
  serve->add_option("--manifest", serve_manifest, "Corpus directory or corpus.json [GRAB_MANIFEST]");
  serve->add_option("--mode", serve_mode, "exact | approx [GRAB_INDEX_MODE]");
  serve->add_option("--index", serve_index, "Prebuilt index file [GRAB_INDEX_FILE]");
  serve->add_option("--provider-url", cfg.provider_url, "Text embedding endpoint [GRAB_EMBED_PROVIDER_URL]");
  serve->add_option("--annotation-log", serve_log, "Annotation JSONL log [GRAB_ANNOTATION_LOG]");
  serve->add_option("--listen", cfg.listen_addr, "host:port [GRAB_LISTEN_ADDR]")->capture_default_str();

  // eval
  auto* eval = app.add_subcommand("eval", "Synthetic evaluation scenarios");
  eval->require_subcommand(1);
  std::uint64_t seed = 42;
  bool eval_json = false;
  auto add_common = [&](CLI::App* sc) {
    sc->add_option("--seed", seed)->capture_default_str();
    sc->add_flag("--json", eval_json, "Full JSON report");
  };
  auto* ev_dedup = eval->add_subcommand("dedup", "Planted hash clusters");
  std::size_t dedup_trials = 20, clusters = 10;
  int spread = 6;
  add_common(ev_dedup);
  ev_dedup->add_option("--trials", dedup_trials, "Independent fixtures")->capture_default_str();
  ev_dedup->add_option("--clusters", clusters)->capture_default_str();
  ev_dedup->add_option("--spread", spread, "Max bits flipped per member (<= 6)")->capture_default_str();

  auto* ev_rerank = eval->add_subcommand("rerank", "Planted-cluster promotion");
  std::size_t rerank_trials = 100;
  add_common(ev_rerank);
  ev_rerank->add_option("--trials", rerank_trials)->capture_default_str();
  ev_rerank->add_option("--refine-k", rparams.refine_k)->capture_default_str();
  ev_rerank->add_option("--expand-m", rparams.expand_m)->capture_default_str();

  auto* ev_abts = eval->add_subcommand("abts", "Planted-moment boundary recovery");
  grab::eval::AbtsEvalOptions abts_opts;
  add_common(ev_abts);
  ev_abts->add_option("--trials", abts_opts.trials)->capture_default_str();
  ev_abts->add_flag("--noiseless", abts_opts.noiseless, "Constant moment, no flank noise");
  ev_abts->add_option("--windows", windows_csv)->capture_default_str();
  ev_abts->add_option("--lambda-s", lambda_s)->capture_default_str();
  ev_abts->add_option("--lambda-t", lambda_t)->capture_default_str();
  ev_abts->add_option("--radius", radius)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      grab::ingest::IngestOptions opts;
      opts.dedup.tau = tau;
      opts.dedup.Validate();
      opts.fallback_shot_len = fallback_len;
      const auto source = grab::ingest::LoadSourceManifest(ingest_manifest);
      auto catalog = grab::ingest::Catalog::Open(ingest_out);
      const auto summary = grab::ingest::IngestAll(source, catalog, opts, threads);
      std::cout << ordered_json{{"videos", summary.videos},
                                {"candidates", summary.candidates},
                                {"retained", summary.retained},
                                {"corpus_videos", catalog.video_count()},
                                {"corpus_keyframes", catalog.keyframe_count()},
                                {"manifest", (catalog.dir() / grab::ingest::Catalog::kManifestName).string()}}
                       .dump(2)
                << "\n";
      return 0;
    }

    if (*build) {
      const auto store = grab::store::EmbeddingStore::Load(ManifestPath(corpus));
      const auto index = grab::index::AnnIndex::Build(store, grab::index::ParseIndexMode(mode_name), graph);
      index.Save(index_out);
      std::cout << ordered_json{{"mode", grab::index::IndexModeName(index.mode())},
                                {"rows", index.size()},
                                {"dim", index.dim()},
                                {"out", index_out}}
                       .dump(2)
                << "\n";
      return 0;
    }

    if (*search) {
      const auto manifest = grab::store::LoadManifest(ManifestPath(corpus));
      const auto store = grab::store::EmbeddingStore::Load(manifest);
      const auto index = index_file.empty()
                             ? grab::index::AnnIndex::Build(store, grab::index::ParseIndexMode(mode_name), graph)
                             : grab::index::AnnIndex::Load(index_file, store);
      const auto query = ReadVectorFile(query_file);
      std::vector<grab::rerank::RerankedHit> hits;
      if (do_rerank) {
        const auto candidates = index.Search(query, std::max(pool, top));
        hits = grab::rerank::Rerank(query, candidates, *store, rparams);
        if (hits.size() > top) hits.resize(top);
      } else {
        for (auto& h : index.Search(query, top)) {
          grab::rerank::RerankedHit r;
          r.raw_rank = h.rank;
          r.hit = std::move(h);
          hits.push_back(std::move(r));
        }
      }
      if (as_json) {
        ordered_json arr = ordered_json::array();
        for (const auto& h : hits) arr.push_back(grab::service::HitToJson(h, *store, do_rerank));
        std::cout << ordered_json{{"hits", std::move(arr)}}.dump(2) << "\n";
      } else {
        for (const auto& h : hits) {
          std::cout << h.hit.rank << "\t" << h.hit.video_id << "\t" << h.hit.frame_index << "\t" << h.hit.score;
          if (do_rerank) std::cout << "\t" << h.s_final << "\t(raw " << h.raw_rank << ")";
          std::cout << "\n";
        }
      }
      return 0;
    }

    if (*temporal) {
      const auto store = grab::store::EmbeddingStore::Load(ManifestPath(corpus));
      const auto params = grab::temporal::AbtsParams::Make(ParseWindows(windows_csv), lambda_s, lambda_t, radius);
      const auto result = grab::temporal::TemporalSearch(ReadVectorFile(q_start_file), ReadVectorFile(q_end_file),
                                                         {video_id, pivot_frame}, *store, params);
      std::cout << grab::service::MomentToJson(result).dump(2) << "\n";
      return 0;
    }

    if (*serve) {
      if (serve_manifest.empty()) throw grab::Error(grab::ErrorCode::kInvalidInput, "--manifest or GRAB_MANIFEST is required");
      cfg.manifest = ManifestPath(serve_manifest);
      cfg.index_mode = grab::index::ParseIndexMode(serve_mode);
      if (!serve_index.empty()) cfg.index_file = serve_index;
      cfg.annotation_log = serve_log;
      const auto [host, port] = grab::service::ParseListenAddr(cfg.listen_addr);
      grab::service::SearchService svc(cfg);
      grab::service::HttpServer server(svc);
      const int bound = server.Bind(host, port);
      g_server = &server;
      std::signal(SIGINT, OnSignal);
      std::signal(SIGTERM, OnSignal);
      const auto snap = svc.snapshot();
      std::cerr << "grab: serving " << snap->store->videos().size() << " videos / " << snap->store->rows()
                << " keyframes on " << host << ":" << bound << " (" << grab::index::IndexModeName(cfg.index_mode)
                << ", simd " << grab::simd::IsaName(grab::simd::ActiveIsa()) << ")\n";
      server.Listen();
      g_server = nullptr;
      return 0;
    }

    if (*ev_dedup) return PrintReport(grab::eval::EvalDedup(seed, dedup_trials, clusters, spread), eval_json);
    if (*ev_rerank) return PrintReport(grab::eval::EvalRerank(seed, rerank_trials, rparams), eval_json);
    if (*ev_abts) {
      abts_opts.params = grab::temporal::AbtsParams::Make(ParseWindows(windows_csv), lambda_s, lambda_t, radius);
      return PrintReport(grab::eval::EvalAbts(seed, abts_opts), eval_json);
    }
  } catch (const grab::Error& e) {
    std::cerr << "grab: " << grab::ErrorCodeName(e.code()) << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "grab: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
