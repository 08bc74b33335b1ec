#include <cmath>
#include <random>

#include "doctest.h"
#include "grab/error.hpp"
#include "grab/eval/eval.hpp"
#include "grab/temporal/abts.hpp"
#include "test_util.hpp"

using namespace grab;
using namespace grab::temporal;

namespace {

// Brute-force scorer: recomputes every quantity from scratch in double.
std::pair<std::size_t, double> OracleAdaptive(const std::vector<std::vector<float>>& frames, const std::vector<float>& q,
                                              double ls, double lt, int r) {
  auto dot = [](const std::vector<float>& a, const std::vector<float>& b) {
    double s = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      s += double(a[i]) * b[i];
      na += double(a[i]) * a[i];
      nb += double(b[i]) * b[i];
    }
    return s / std::sqrt(na * nb);
  };
  std::size_t best = 0;
  double best_c = -1e300;
  const int n = static_cast<int>(frames.size());
  for (int i = 0; i < n; ++i) {
    std::vector<double> sims;
    for (int j = std::max(0, i - r); j <= std::min(n - 1, i + r); ++j)
      if (j != i) sims.push_back(dot(frames[j], frames[i]));
    double t = 0;
    if (!sims.empty()) {
      double m = 0, v = 0;
      for (double x : sims) m += x;
      m /= sims.size();
      for (double x : sims) v += (x - m) * (x - m);
      t = 1 - std::min(1.0, 2 * std::sqrt(v / sims.size()));
    }
    const double c = ls * dot(q, frames[i]) + lt * t;
    if (c > best_c + 1e-9) {
      best_c = c;
      best = static_cast<std::size_t>(i);
    }
  }
  return {best, best_c};
}

std::vector<float> Unit(std::vector<float> v) {
  double n = 0;
  for (float x : v) n += double(x) * x;
  for (auto& x : v) x = static_cast<float>(x / std::sqrt(n));
  return v;
}

std::vector<store::FrameEmbedding> AsFrames(const std::vector<std::vector<float>>& v) {
  std::vector<store::FrameEmbedding> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back({static_cast<std::int64_t>(i), v[i]});
  return out;
}

std::shared_ptr<const store::EmbeddingStore> SequenceStore(const std::vector<std::vector<float>>& frames, double fps,
                                                           std::int64_t stride, std::int64_t frame_count) {
  store::EmbeddingStore::Builder::Video v;
  v.video_id = "v";
  v.fps = fps;
  v.frame_count = frame_count;
  v.stride = stride;
  for (const auto& f : frames) v.sequence_vectors.insert(v.sequence_vectors.end(), f.begin(), f.end());
  return store::EmbeddingStore::Builder(frames[0].size()).AddVideo(std::move(v)).Build();
}

}  // namespace

TEST_SUITE("temporal") {
  TEST_CASE("similarity") {
    const std::vector<float> v{0.3f, -0.4f, 0.5f};
    CHECK(Similarity(v, v) == doctest::Approx(1.f));
    CHECK(Similarity(std::vector<float>{1.f, 0.f}, std::vector<float>{0.f, 1.f}) == doctest::Approx(0.f));
    CHECK(Similarity(std::vector<float>{1.f, 0.f}, std::vector<float>{0.70710678f, 0.70710678f}) ==
          doctest::Approx(0.7071).epsilon(1e-4));
    try {
      Similarity(std::vector<float>{1.f}, std::vector<float>{1.f, 0.f});
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kDimensionMismatch);
    }
  }

  TEST_CASE("stability examples") {
    const std::vector<float> e{0.f, 1.f};
    const std::vector<std::vector<float>> same{e, e, e};
    std::vector<std::span<const float>> spans(same.begin(), same.end());
    CHECK(Stability(spans, e) == doctest::Approx(1.f));
    CHECK(StabilityFromSimilarities(std::vector<float>{1.f, 0.f}) == doctest::Approx(0.f));
    CHECK(StabilityFromSimilarities(std::vector<float>{0.9f, 0.8f, 0.85f, 0.95f}) == doctest::Approx(0.888).epsilon(1e-3));
    CHECK(StabilityFromSimilarities({}) == 0.f);
  }

  TEST_CASE("adaptive search examples") {
    const auto params = AbtsParams{};
    const std::vector<std::vector<float>> single{{1.f, 0.f}};
    const auto r = AdaptiveSearch(std::vector<float>{1.f, 0.f}, AsFrames(single), params);
    CHECK(r.frame_index == 0);
    CHECK(r.confidence == doctest::Approx(params.lambda_s));
    CHECK_THROWS_AS(AdaptiveSearch(std::vector<float>{1.f, 0.f}, {}, params), Error);
  }

  TEST_CASE("parameters normalize and validate") {
    const auto p = AbtsParams::Make({10, 15, 20}, 7, 3);
    CHECK(p.lambda_s == doctest::Approx(0.7));
    CHECK(p.lambda_t == doctest::Approx(0.3));
    CHECK_THROWS_AS(AbtsParams::Make({}, 0.7, 0.3), Error);
    CHECK_THROWS_AS(AbtsParams::Make({10, -1}, 0.7, 0.3), Error);
    CHECK_THROWS_AS(AbtsParams::Make({10}, 0, 0), Error);
    CHECK_THROWS_AS(AbtsParams::Make({10}, 0.7, 0.3, 0), Error);
  }

  TEST_CASE("plateau sequence matches the brute-force scorer") {
    std::mt19937_64 rng(77);
    std::normal_distribution<float> n(0.f, 1.f);
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t d = 16;
      std::vector<float> q(d);
      for (auto& x : q) x = n(rng);
      q = Unit(q);
      std::vector<std::vector<float>> frames(50, std::vector<float>(d));
      for (std::size_t i = 0; i < 50; ++i) {
        for (std::size_t k = 0; k < d; ++k) frames[i][k] = (i >= 15 && i < 35) ? q[k] + 0.05f * n(rng) : n(rng);
        frames[i] = Unit(frames[i]);
      }
      const auto params = AbtsParams{};
      const auto got = AdaptiveSearch(q, AsFrames(frames), params);
      const auto [want, want_c] = OracleAdaptive(frames, q, params.lambda_s, params.lambda_t, 2);
      CHECK(got.position == want);
      CHECK(got.confidence == doctest::Approx(want_c).epsilon(1e-5));
      CHECK(got.frame_index >= 15);
      CHECK(got.frame_index < 35);

      for (const auto& c : ScoreFrames(q, AsFrames(frames), params)) {
        CHECK(c.stability >= 0.f);
        CHECK(c.stability <= 1.f);
        CHECK(c.confidence == params.lambda_s * c.similarity + params.lambda_t * c.stability);
      }
    }
  }

  TEST_CASE("lambda_t = 0 reduces to the similarity argmax") {
    std::mt19937_64 rng(4);
    std::normal_distribution<float> n(0.f, 1.f);
    const auto p = AbtsParams::Make({10}, 1, 0);
    for (int t = 0; t < 50; ++t) {
      std::vector<std::vector<float>> frames(30, std::vector<float>(8));
      for (auto& f : frames)
        for (auto& x : f) x = n(rng);
      std::vector<float> q(8);
      for (auto& x : q) x = n(rng);
      std::size_t best = 0;
      for (std::size_t i = 1; i < 30; ++i)
        if (Similarity(q, frames[i]) > Similarity(q, frames[best])) best = i;
      for (auto& f : frames) f = Unit(f);
      CHECK(AdaptiveSearch(Unit(q), AsFrames(frames), p).position == best);
    }
  }

  TEST_CASE("clamping on a short video") {
    std::mt19937_64 rng(6);
    std::normal_distribution<float> n(0.f, 1.f);
    std::vector<std::vector<float>> frames(20, std::vector<float>(8));  // 4 s at 5 Hz
    for (auto& f : frames)
      for (auto& x : f) x = n(rng);
    const auto s = SequenceStore(frames, 25.0, 5, 100);
    const auto r = TemporalSearch(frames[3], frames[15], {"v", 50}, *s, {});
    CHECK(r.f_s <= 50);
    CHECK(r.f_e >= 50);
    CHECK(r.f_e <= 95);
    CHECK(r.t_s == doctest::Approx(r.f_s / 25.0));
    REQUIRE(r.windows.size() == 3);
    CHECK(r.windows[0].start_candidates == 11);  // frames 0..50
    CHECK(r.windows[0].end_candidates == 10);    // frames 50..95
  }

  TEST_CASE("uniform video ties resolve to the earliest frame") {
    std::vector<std::vector<float>> frames(100, std::vector<float>{0.6f, 0.8f, 0.f});
    const auto s = SequenceStore(frames, 5.0, 1, 100);
    const auto r = TemporalSearch(frames[0], frames[0], {"v", 50}, *s, {});
    CHECK(r.f_s == 0);   // 10 s window reaches frame 0
    CHECK(r.f_e == 50);  // pivot is the earliest end candidate
    CHECK(r.window_start_s == 10.0);
    CHECK(r.window_end_s == 10.0);
  }

  TEST_CASE("errors") {
    std::vector<std::vector<float>> frames(10, std::vector<float>{1.f, 0.f});
    const auto s = SequenceStore(frames, 5.0, 1, 10);
    const std::vector<float> q{1.f, 0.f};
    auto code = [&](auto&& f) {
      try {
        f();
      } catch (const Error& e) {
        return e.code();
      }
      FAIL("expected throw");
      return ErrorCode::kIo;
    };
    CHECK(code([&] { TemporalSearch(q, q, {"nope", 0}, *s, {}); }) == ErrorCode::kNotFound);
    CHECK(code([&] { TemporalSearch(q, q, {"v", 10}, *s, {}); }) == ErrorCode::kInvalidInput);
    CHECK(code([&] { TemporalSearch(q, q, {"v", -1}, *s, {}); }) == ErrorCode::kInvalidInput);
    CHECK(code([&] { TemporalSearch(std::vector<float>{1.f}, q, {"v", 1}, *s, {}); }) == ErrorCode::kDimensionMismatch);
    const auto flat = grab::test::FlatStore({1.f, 0.f}, 2);
    CHECK(code([&] { TemporalSearch(q, q, {"v", 0}, *flat, {}); }) == ErrorCode::kCapability);
  }

  TEST_CASE("unaligned pivot past the last grid frame") {
    std::vector<std::vector<float>> frames(20, std::vector<float>{1.f, 0.f});
    const auto s = SequenceStore(frames, 25.0, 5, 98);  // grid 0..95, frames 96 and 97 off-grid
    const auto r = TemporalSearch(frames[0], frames[0], {"v", 97}, *s, {});
    CHECK(r.f_s <= 97);
    CHECK(r.f_e == 97);
  }

  TEST_CASE("duration warning") {
    std::vector<std::vector<float>> frames(100, std::vector<float>{1.f, 0.f});
    const auto s = SequenceStore(frames, 5.0, 1, 100);
    const auto r = TemporalSearch(frames[0], frames[0], {"v", 50}, *s, AbtsParams::Make({0.2}, 0.7, 0.3));
    CHECK(!r.warnings.empty());
  }

  TEST_CASE("window monotonicity") {
    for (std::uint64_t t = 0; t < 10; ++t) {
      eval::Rng rng(eval::TrialSeed(99, t));
      const auto fx = eval::MakeMomentFixture(rng, true);
      const PivotRef pivot{fx.video_id, fx.pivot_frame};
      double prev_s = -1e9, prev_e = -1e9;
      std::vector<double> windows;
      for (double w : {10.0, 15.0, 20.0}) {
        windows.push_back(w);
        const auto r = TemporalSearch(fx.query_start, fx.query_end, pivot, *fx.store, AbtsParams::Make(windows, 0.7, 0.3));
        CHECK(r.confidence_start >= prev_s);
        CHECK(r.confidence_end >= prev_e);
        prev_s = r.confidence_start;
        prev_e = r.confidence_end;
      }
    }
  }

  TEST_CASE("determinism") {
    eval::Rng rng(5);
    const auto fx = eval::MakeMomentFixture(rng, true);
    const PivotRef pivot{fx.video_id, fx.pivot_frame};
    const auto a = TemporalSearch(fx.query_start, fx.query_end, pivot, *fx.store, {});
    const auto b = TemporalSearch(fx.query_start, fx.query_end, pivot, *fx.store, {});
    CHECK(a.f_s == b.f_s);
    CHECK(a.f_e == b.f_e);
    CHECK(a.confidence_start == b.confidence_start);
  }

  TEST_CASE("split query") {
    const std::string text = "Begin with X. End with Y.";
    auto [a, b] = SplitQuery(text, 13);
    CHECK(a == "Begin with X.");
    CHECK(b == "End with Y.");
    std::tie(a, b) = SplitQuery("just one sentence here");
    CHECK(a == "just one sentence here");
    CHECK(b == a);
    // cuts after offsets 10 and 31 in a 45-char text; 31 is nearer the midpoint
    const std::string three = "Aaaa aaaa. Bbbb bbbb bbbb bbbb. Cccc cccc cc.";
    REQUIRE(three.size() == 45);
    std::tie(a, b) = SplitQuery(three);
    CHECK(a == "Aaaa aaaa. Bbbb bbbb bbbb bbbb.");
    CHECK(b == "Cccc cccc cc.");
    CHECK_THROWS_AS(SplitQuery("   "), Error);
  }
}
