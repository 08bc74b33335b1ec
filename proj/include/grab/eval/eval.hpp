#pragma once

// Synthetic evaluation harness. Every scenario is reproducible from a single
// 64-bit seed: trial t draws from Rng(TrialSeed(seed, t)), so trials are
// independent of each other and of execution order.

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "grab/ingest/phash.hpp"
#include "json.hpp"
#include "grab/rerank/rerank.hpp"
#include "grab/store/embedding_store.hpp"
#include "grab/temporal/abts.hpp"

namespace grab::eval {

// mt19937_64 with explicit transforms (53-bit uniforms, Box-Muller normals)
// so sequences do not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t NextU64();
  double Uniform();                      // [0, 1)
  double Uniform(double lo, double hi);  // [lo, hi)
  std::int64_t Integer(std::int64_t lo, std::int64_t hi);  // [lo, hi)
  double Normal(double mean = 0.0, double stddev = 1.0);
  std::vector<float> UnitVector(std::size_t dim);
  // k distinct elements of `pool`, in draw order.
  std::vector<std::int64_t> Sample(std::vector<std::int64_t> pool, std::size_t k);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t TrialSeed(std::uint64_t seed, std::uint64_t trial);

struct EvalReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  std::size_t successes = 0;
  std::string tolerance;
  bool bar_met = false;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  nlohmann::ordered_json per_trial = nlohmann::ordered_json::array();
  double wall_clock_s = 0.0;

  double success_rate() const { return trials ? static_cast<double>(successes) / trials : 0.0; }
  // wall_clock_s is omitted when include_timing is false so reports can be
  // compared byte for byte.
  nlohmann::ordered_json ToJson(bool include_timing = true) const;
  std::string Summary() const;
};

// ---- dedup -----------------------------------------------------------------

struct DedupFixture {
  std::vector<ingest::PerceptualHash> hashes;  // contiguous runs, one per cluster
  std::vector<std::size_t> cluster_of;         // cluster id per hash
  std::vector<std::size_t> run_starts;         // first position of each cluster
};

// Cluster centres are pairwise >= 20 + 2 * spread apart; members lie within
// `spread` bits of their centre, so intra-cluster distances are <= 2 * spread
// and inter-cluster distances >= 20. Throws kInvalidInput if spread would
// allow intra-cluster distances above 12 or clusters < 1.
DedupFixture MakeDedupFixture(Rng& rng, std::size_t clusters, int spread, std::size_t max_run = 8);

EvalReport EvalDedup(std::uint64_t seed, std::size_t trials = 1, std::size_t clusters = 10, int spread = 6);

// ---- rerank ----------------------------------------------------------------

struct RerankFixture {
  std::shared_ptr<const store::EmbeddingStore> store;
  std::vector<float> query;
  std::size_t target_row = 0;
};

// 100 non-negative vectors, d = 64: five single-concept distractors, a
// five-member cluster that sits just below them and 90 unrelated background
// vectors. The target is the best cluster member, raw rank 6.
RerankFixture MakeRerankFixture(Rng& rng);

struct RerankTrial {
  std::size_t raw_rank = 0;
  std::size_t new_rank = 0;
  bool success = false;
};
RerankTrial RunRerankTrial(const RerankFixture& fixture, const rerank::RerankParams& params);

EvalReport EvalRerank(std::uint64_t seed, std::size_t trials = 100, rerank::RerankParams params = {});

// ---- ABTS ------------------------------------------------------------------

struct MomentFixture {
  std::shared_ptr<const store::EmbeddingStore> store;
  std::string video_id = "planted";
  std::vector<float> query_start;
  std::vector<float> query_end;
  std::int64_t pivot_frame = 600;
  std::int64_t start_frame = 450;  // 18 s
  std::int64_t end_frame = 775;    // 31 s
  std::int64_t stride = 5;
};

// 60 s at 25 fps sampled every 5 frames (300 strided frames). Noisy: short
// random shots outside the moment, a stable moment with boundary cues, and
// query-like spikes at shot cuts in the flanks. Noiseless: a constant moment
// vector plus the boundary cues.
MomentFixture MakeMomentFixture(Rng& rng, bool noisy = true);

struct AbtsEvalOptions {
  std::size_t trials = 100;
  bool noiseless = false;
  int tolerance_frames = 3;  // strided frames
  temporal::AbtsParams params;
};

EvalReport EvalAbts(std::uint64_t seed, const AbtsEvalOptions& options = {});

}  // namespace grab::eval
