#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "grab/error.hpp"
#include "grab/eval/eval.hpp"
#include "grab/index/ann_index.hpp"
#include "grab/ingest/keyframes.hpp"
#include "grab/simd/kernels.hpp"

namespace grab::eval {
namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

using Vec = std::vector<double>;

double DotD(const Vec& a, const Vec& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Vec Unit(Vec v) {
  const double n = std::sqrt(DotD(v, v));
  for (auto& x : v) x /= n;
  return v;
}

Vec AbsNormal(Rng& rng, std::size_t dim, double stddev) {
  Vec v(dim);
  for (auto& x : v) x = std::abs(rng.Normal(0.0, stddev));
  return v;
}

Vec ToDouble(const std::vector<float>& v) { return Vec(v.begin(), v.end()); }

void AppendFloat(std::vector<float>& out, const Vec& v) {
  for (double x : v) out.push_back(static_cast<float>(x));
}

nlohmann::ordered_json Histogram(const std::map<long long, std::size_t>& h) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : h) j[std::to_string(k)] = v;
  return j;
}

}  // namespace

// ---- dedup -----------------------------------------------------------------

DedupFixture MakeDedupFixture(Rng& rng, std::size_t clusters, int spread, std::size_t max_run) {
  if (clusters < 1) throw Error(ErrorCode::kInvalidInput, "clusters must be >= 1");
  if (spread < 0 || 2 * spread > 12) {
    throw Error(ErrorCode::kInvalidInput, "spread " + std::to_string(spread) +
                                              " allows intra-cluster distance above 12; use 0..6");
  }
  if (max_run < 1) throw Error(ErrorCode::kInvalidInput, "max_run must be >= 1");
  const auto min_sep = static_cast<std::uint32_t>(20 + 2 * spread);
  const auto& k = simd::Active();

  std::vector<std::uint64_t> centres;
  std::vector<std::uint32_t> dist;
  std::size_t attempts = 0;
  while (centres.size() < clusters) {
    if (++attempts > 10'000'000) throw Error(ErrorCode::kInvalidInput, "could not place separated cluster centres");
    const std::uint64_t c = rng.NextU64();
    dist.resize(centres.size());
    k.hamming_batch(c, centres.data(), centres.size(), dist.data());
    if (std::all_of(dist.begin(), dist.end(), [&](std::uint32_t d) { return d >= min_sep; })) centres.push_back(c);
  }

  std::vector<std::int64_t> bits(64);
  for (int b = 0; b < 64; ++b) bits[b] = b;
  DedupFixture f;
  for (std::size_t c = 0; c < clusters; ++c) {
    f.run_starts.push_back(f.hashes.size());
    const auto run = static_cast<std::size_t>(rng.Integer(1, static_cast<std::int64_t>(max_run) + 1));
    for (std::size_t m = 0; m < run; ++m) {
      std::uint64_t h = centres[c];
      const auto flips = static_cast<std::size_t>(rng.Integer(0, spread + 1));
      for (auto b : rng.Sample(bits, flips)) h ^= std::uint64_t{1} << b;
      f.hashes.push_back(ingest::PerceptualHash{h});
      f.cluster_of.push_back(c);
    }
  }
  return f;
}

EvalReport EvalDedup(std::uint64_t seed, std::size_t trials, std::size_t clusters, int spread) {
  const auto t0 = Clock::now();
  EvalReport r;
  r.scenario = "dedup";
  r.seed = seed;
  r.trials = trials;
  r.tolerance = "exactly one representative per planted cluster";
  const ingest::DedupConfig cfg{};
  r.params = {{"clusters", clusters}, {"spread", spread}, {"tau", cfg.tau}, {"hash_bits", 64}};

  std::uint32_t worst_intra = 0, best_inter = 64;
  std::size_t false_merges = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(TrialSeed(seed, t));
    const auto f = MakeDedupFixture(rng, clusters, spread);
    for (std::size_t i = 0; i < f.hashes.size(); ++i) {
      for (std::size_t j = i + 1; j < f.hashes.size(); ++j) {
        const auto d = static_cast<std::uint32_t>(ingest::HammingDistance(f.hashes[i], f.hashes[j]));
        if (f.cluster_of[i] == f.cluster_of[j]) worst_intra = std::max(worst_intra, d);
        else best_inter = std::min(best_inter, d);
      }
    }
    const auto kept = ingest::ClusterRepresentatives(f.hashes, cfg);
    std::vector<std::size_t> per_cluster(clusters, 0);
    for (auto pos : kept) ++per_cluster[f.cluster_of[pos]];
    const auto merged = static_cast<std::size_t>(std::count(per_cluster.begin(), per_cluster.end(), 0));
    false_merges += merged;
    const bool ok = kept == f.run_starts;
    r.successes += ok;
    r.per_trial.push_back({{"trial", t}, {"hashes", f.hashes.size()}, {"retained", kept.size()},
                           {"false_merges", merged}, {"success", ok}});
  }
  r.metrics = {{"max_intra_distance", worst_intra},
               {"min_inter_distance", best_inter},
               {"false_merges", false_merges}};
  r.bar_met = r.successes == r.trials;
  r.wall_clock_s = Seconds(t0);
  return r;
}

// ---- rerank ----------------------------------------------------------------

RerankFixture MakeRerankFixture(Rng& rng) {
  constexpr std::size_t d = 64, kConcepts = 5, kCluster = 5, kTotal = 100;
  Vec q(d, 0.0);
  for (std::size_t i = 0; i < kConcepts; ++i) q[i] = 1.0;
  q = Unit(q);

  std::vector<Vec> vecs;
  double distractor_min = 2.0;
  for (std::size_t i = 0; i < kConcepts; ++i) {
    Vec v = AbsNormal(rng, d, 0.05);
    v[i] += 1.0;
    vecs.push_back(Unit(v));
    distractor_min = std::min(distractor_min, DotD(vecs.back(), q));
  }
  const double target_cos = distractor_min - rng.Uniform(0.01, 0.03);

  const Vec base = AbsNormal(rng, d, 0.3);
  std::vector<Vec> noise;
  for (std::size_t j = 0; j < kCluster; ++j) noise.push_back(AbsNormal(rng, d, 0.1));
  auto make_cluster = [&](double level) {
    std::vector<Vec> out;
    for (const auto& n : noise) {
      Vec b = base;
      for (std::size_t i = 0; i < kConcepts; ++i) b[i] = level;
      for (std::size_t i = 0; i < d; ++i) b[i] += n[i];
      out.push_back(Unit(b));
    }
    return out;
  };
  auto best_cos = [&](const std::vector<Vec>& c) {
    double m = -2;
    for (const auto& v : c) m = std::max(m, DotD(v, q));
    return m;
  };
  // Concept level that puts the best member just under the distractors.
  double lo = 0.0, hi = 5.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (best_cos(make_cluster(mid)) < target_cos ? lo : hi) = mid;
  }
  const auto cluster = make_cluster(lo);
  double cluster_min = 2.0;
  for (const auto& v : cluster) cluster_min = std::min(cluster_min, DotD(v, q));
  vecs.insert(vecs.end(), cluster.begin(), cluster.end());

  while (vecs.size() < kTotal) {
    Vec v = AbsNormal(rng, d, 0.3);
    v[static_cast<std::size_t>(rng.Integer(0, kConcepts))] += rng.Uniform(0.0, 0.5);
    v = Unit(v);
    if (DotD(v, q) < cluster_min) vecs.push_back(std::move(v));
  }

  std::size_t target = kConcepts;
  for (std::size_t j = kConcepts; j < kConcepts + kCluster; ++j) {
    if (DotD(vecs[j], q) > DotD(vecs[target], q)) target = j;
  }

  // Shuffle vectors over frame slots so corpus order carries no signal.
  std::vector<std::int64_t> slots(kTotal);
  for (std::size_t i = 0; i < kTotal; ++i) slots[i] = static_cast<std::int64_t>(i);
  const auto perm = rng.Sample(slots, kTotal);  // vector i -> frame perm[i]
  std::vector<std::size_t> at_frame(kTotal);
  for (std::size_t i = 0; i < kTotal; ++i) at_frame[static_cast<std::size_t>(perm[i])] = i;

  store::EmbeddingStore::Builder::Video video;
  video.video_id = "planted_cluster";
  video.fps = 1.0;
  video.frame_count = kTotal;
  for (std::size_t f = 0; f < kTotal; ++f) {
    video.keyframes.push_back({static_cast<std::int64_t>(f), 0, std::nullopt});
    AppendFloat(video.keyframe_vectors, vecs[at_frame[f]]);
  }
  RerankFixture out;
  out.store = store::EmbeddingStore::Builder(d).AddVideo(std::move(video)).Build();
  AppendFloat(out.query, q);
  out.target_row = *out.store->FindRow("planted_cluster", perm[target]);
  return out;
}

RerankTrial RunRerankTrial(const RerankFixture& fx, const rerank::RerankParams& params) {
  const auto q = index::PrepareQuery(fx.query, fx.store->dim());
  const auto hits = index::ExactSearch(*fx.store, q, fx.store->rows());
  const auto reranked = rerank::Rerank(q, hits, *fx.store, params);
  RerankTrial t;
  for (const auto& h : hits) {
    if (h.row == fx.target_row) t.raw_rank = h.rank;
  }
  for (const auto& h : reranked) {
    if (h.hit.row == fx.target_row) t.new_rank = h.hit.rank;
  }
  t.success = t.new_rank <= 3 && (t.new_rank < t.raw_rank || t.new_rank == 1);
  return t;
}

EvalReport EvalRerank(std::uint64_t seed, std::size_t trials, rerank::RerankParams params) {
  params.Validate();
  const auto t0 = Clock::now();
  EvalReport r;
  r.scenario = "rerank";
  r.seed = seed;
  r.trials = trials;
  r.tolerance = "target rank <= 3 and improved (or already 1)";
  r.params = {{"refine_k", params.refine_k},
              {"expand_m", params.expand_m},
              {"p_limit_threshold", params.p_limit_threshold},
              {"corpus_size", 100},
              {"dim", 64},
              {"bar_success_rate", 0.8}};
  double raw_sum = 0, new_sum = 0;
  std::map<long long, std::size_t> hist;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(TrialSeed(seed, t));
    const auto fx = MakeRerankFixture(rng);
    const auto res = RunRerankTrial(fx, params);
    raw_sum += static_cast<double>(res.raw_rank);
    new_sum += static_cast<double>(res.new_rank);
    ++hist[static_cast<long long>(res.new_rank)];
    r.successes += res.success;
    r.per_trial.push_back(
        {{"trial", t}, {"raw_rank", res.raw_rank}, {"new_rank", res.new_rank}, {"success", res.success}});
  }
  const double n = trials ? static_cast<double>(trials) : 1.0;
  r.metrics = {{"mean_raw_rank", raw_sum / n}, {"mean_new_rank", new_sum / n}, {"new_rank_histogram", Histogram(hist)}};
  r.bar_met = trials > 0 && r.success_rate() >= 0.8 && new_sum < raw_sum;
  r.wall_clock_s = Seconds(t0);
  return r;
}

// ---- ABTS ------------------------------------------------------------------

MomentFixture MakeMomentFixture(Rng& rng, bool noisy) {
  constexpr std::size_t d = 64, n = 300;
  constexpr std::int64_t s0 = 90, e0 = 155;
  constexpr double kCue = 1.2, kSpike = 1.2, kNoise = 0.15;
  const double noise_scale = kNoise / std::sqrt(static_cast<double>(d));

  const Vec qs = ToDouble(rng.UnitVector(d));
  const Vec qe = ToDouble(rng.UnitVector(d));
  const Vec m = ToDouble(rng.UnitVector(d));
  auto jitter = [&](Vec v) {
    for (auto& x : v) x += noise_scale * rng.Normal();
    return v;
  };

  std::vector<Vec> frames(n, m);
  std::vector<std::int64_t> cuts;
  if (noisy) {
    std::size_t i = 0;
    while (i < n) {
      const auto len = static_cast<std::size_t>(rng.Integer(3, 9));
      const Vec proto = ToDouble(rng.UnitVector(d));
      const std::size_t end = std::min(i + len, n);
      for (std::size_t k = i; k < end; ++k) frames[k] = jitter(proto);
      cuts.push_back(static_cast<std::int64_t>(end) - 1);
      i += len;
    }
    for (std::int64_t k = s0; k <= e0; ++k) frames[static_cast<std::size_t>(k)] = jitter(m);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [c, q] : {std::pair{s0, &qs}, std::pair{e0, &qe}}) {
      const auto j = std::abs(static_cast<std::int64_t>(i) - c);
      if (j > 10) continue;
      const double w = kCue * (1.0 - static_cast<double>(j) / 11.0);
      for (std::size_t x = 0; x < d; ++x) frames[i][x] += w * (*q)[x];
    }
    frames[i] = Unit(frames[i]);
  }
  if (noisy) {
    // Query-like spikes at shot cuts, away from the window edges so they do
    // not sit on a truncated neighbourhood.
    const std::int64_t edges[] = {20, 45, 70, 170, 195, 220};
    auto clear = [&](std::int64_t c) {
      return std::all_of(std::begin(edges), std::end(edges), [&](std::int64_t e) { return std::abs(c - e) > 3; });
    };
    std::vector<std::int64_t> left, right;
    for (auto c : cuts) {
      if (c >= 20 && c < s0 - 12 && clear(c)) left.push_back(c);
      if (c > e0 + 12 && c < static_cast<std::int64_t>(n) - 1 && clear(c)) right.push_back(c);
    }
    for (const auto& [pool, q] : {std::pair{&left, &qs}, std::pair{&right, &qe}}) {
      for (auto c : rng.Sample(*pool, 3)) {
        auto& f = frames[static_cast<std::size_t>(c)];
        for (std::size_t x = 0; x < d; ++x) f[x] += kSpike * (*q)[x];
        f = Unit(f);
      }
    }
  }

  MomentFixture fx;
  store::EmbeddingStore::Builder::Video video;
  video.video_id = fx.video_id;
  video.fps = 25.0;
  video.frame_count = static_cast<std::int64_t>(n) * fx.stride;
  video.stride = fx.stride;
  for (std::size_t i = 0; i < n; ++i) {
    AppendFloat(video.sequence_vectors, frames[i]);
    if (i % 25 == 0) {
      video.keyframes.push_back({static_cast<std::int64_t>(i) * fx.stride, static_cast<std::int64_t>(i / 25), std::nullopt});
      AppendFloat(video.keyframe_vectors, frames[i]);
    }
  }
  fx.store = store::EmbeddingStore::Builder(d).AddVideo(std::move(video)).Build();
  AppendFloat(fx.query_start, qs);
  AppendFloat(fx.query_end, qe);
  fx.start_frame = s0 * fx.stride;
  fx.end_frame = e0 * fx.stride;
  fx.pivot_frame = 120 * fx.stride;
  return fx;
}

EvalReport EvalAbts(std::uint64_t seed, const AbtsEvalOptions& opt) {
  opt.params.Validate();
  const auto t0 = Clock::now();
  const auto ablation = temporal::AbtsParams::Make(opt.params.windows_s, 1.0, 0.0, opt.params.neighborhood_radius);
  EvalReport r;
  r.scenario = opt.noiseless ? "abts_noiseless" : "abts";
  r.seed = seed;
  r.trials = opt.trials;
  r.tolerance = "both boundaries within +-" + std::to_string(opt.tolerance_frames) + " strided frames";
  r.params = {{"windows_s", opt.params.windows_s},
              {"lambda_s", opt.params.lambda_s},
              {"lambda_t", opt.params.lambda_t},
              {"neighborhood_radius", opt.params.neighborhood_radius},
              {"noiseless", opt.noiseless},
              {"duration_s", 60},
              {"sample_rate_hz", 5},
              {"moment_s", {18, 31}},
              {"pivot_s", 24},
              {"bar_success_rate", 0.9}};

  std::map<long long, std::size_t> hist_start, hist_end;
  std::size_t ablation_successes = 0;
  long long max_abs_err = 0;
  for (std::size_t t = 0; t < opt.trials; ++t) {
    Rng rng(TrialSeed(seed, t));
    const auto fx = MakeMomentFixture(rng, !opt.noiseless);
    const temporal::PivotRef pivot{fx.video_id, fx.pivot_frame};
    auto errors = [&](const temporal::AbtsParams& p) {
      const auto res = temporal::TemporalSearch(fx.query_start, fx.query_end, pivot, *fx.store, p);
      return std::pair{std::llround(static_cast<double>(res.f_s - fx.start_frame) / fx.stride),
                       std::llround(static_cast<double>(res.f_e - fx.end_frame) / fx.stride)};
    };
    const auto [es, ee] = errors(opt.params);
    const auto [as, ae] = errors(ablation);
    const bool ok = std::llabs(es) <= opt.tolerance_frames && std::llabs(ee) <= opt.tolerance_frames;
    const bool ablation_ok = std::llabs(as) <= opt.tolerance_frames && std::llabs(ae) <= opt.tolerance_frames;
    r.successes += ok;
    ablation_successes += ablation_ok;
    ++hist_start[es];
    ++hist_end[ee];
    max_abs_err = std::max({max_abs_err, std::llabs(es), std::llabs(ee)});
    r.per_trial.push_back({{"trial", t},
                           {"start_error", es},
                           {"end_error", ee},
                           {"success", ok},
                           {"ablation_start_error", as},
                           {"ablation_end_error", ae},
                           {"ablation_success", ablation_ok}});
  }
  r.metrics = {{"start_error_histogram", Histogram(hist_start)},
               {"end_error_histogram", Histogram(hist_end)},
               {"max_abs_error", max_abs_err},
               {"ablation_lambda_t0_successes", ablation_successes},
               {"ablation_lambda_t0_success_rate",
                opt.trials ? static_cast<double>(ablation_successes) / opt.trials : 0.0}};
  r.bar_met = opt.trials > 0 && r.success_rate() >= 0.9 &&
              (opt.noiseless || ablation_successes <= r.successes);
  r.wall_clock_s = Seconds(t0);
  return r;
}

}  // namespace grab::eval
