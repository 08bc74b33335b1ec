#include <random>

#include "doctest.h"
#include "grab/error.hpp"
#include "grab/ingest/keyframes.hpp"

using namespace grab;
using namespace grab::ingest;

namespace {

// Sets the lowest `n` bits.
PerceptualHash Low(int n) { return PerceptualHash{n == 64 ? ~0ull : ((1ull << n) - 1)}; }

std::vector<KeyframeRecord> Records(const std::vector<PerceptualHash>& hashes) {
  std::vector<KeyframeRecord> out;
  for (std::size_t i = 0; i < hashes.size(); ++i) {
    KeyframeRecord r;
    r.video_id = "v";
    r.frame_index = static_cast<std::int64_t>(i * 10);
    r.phash = hashes[i];
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_SUITE("keyframes") {
  TEST_CASE("keyframe index selection") {
    CHECK(SelectKeyframeIndices({0, 0}) == std::vector<std::int64_t>{0});
    CHECK(SelectKeyframeIndices({100, 160}) == std::vector<std::int64_t>{100, 120, 140, 160});
    CHECK(SelectKeyframeIndices({5, 7}) == std::vector<std::int64_t>{5, 6, 7});
  }

  TEST_CASE("keyframe selection properties") {
    for (std::int64_t a = 0; a < 20; ++a) {
      for (std::int64_t b = a; b < a + 50; ++b) {
        const auto idx = SelectKeyframeIndices({a, b});
        REQUIRE(!idx.empty());
        CHECK(idx.front() == a);
        CHECK(idx.back() == b);
        for (std::size_t i = 1; i < idx.size(); ++i) CHECK(idx[i] > idx[i - 1]);
        CHECK(idx.size() <= 4);
      }
    }
  }

  TEST_CASE("near-duplicate threshold at tau 0.8") {
    const DedupConfig cfg{};
    CHECK(IsNearDuplicate(Low(0), Low(0), cfg));
    CHECK(IsNearDuplicate(Low(12), Low(0), cfg));
    CHECK_FALSE(IsNearDuplicate(Low(13), Low(0), cfg));
    CHECK(IsNearDuplicate(Low(0), Low(12), cfg));  // symmetric
    CHECK_FALSE(IsNearDuplicate(Low(0), Low(13), cfg));
    CHECK(IsNearDuplicate(Low(64), Low(0), DedupConfig{1e-9}) == false);
    CHECK(IsNearDuplicate(Low(0), Low(1), DedupConfig{1.0}) == false);
  }

  TEST_CASE("dedup config validation") {
    CHECK_THROWS_AS(DedupConfig{0.0}.Validate(), Error);
    CHECK_THROWS_AS(DedupConfig{1.5}.Validate(), Error);
    CHECK_NOTHROW(DedupConfig{1.0}.Validate());
  }

  TEST_CASE("dedup examples") {
    const DedupConfig cfg{};
    CHECK(DeduplicateShot(Records({Low(3), Low(3), Low(3), Low(3)}), cfg).size() == 1);
    // pairwise distances > 12
    const std::vector<PerceptualHash> far{PerceptualHash{0}, PerceptualHash{0xFFFFull}, PerceptualHash{0xFFFF0000ull << 16},
                                          PerceptualHash{0xFFFFull << 48}};
    CHECK(DeduplicateShot(Records(far), cfg).size() == 4);
    // distances [0, 5, 30, 31] from frame 0; frames 3 and 4 within 12 of each other
    const auto kept = DeduplicateShot(Records({Low(0), Low(5), Low(30), Low(31)}), cfg);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].frame_index == 0);
    CHECK(kept[1].frame_index == 20);
    CHECK(DeduplicateShot({}, cfg).empty());
  }

  TEST_CASE("dedup properties on random runs") {
    std::mt19937_64 rng(17);
    const DedupConfig cfg{};
    for (int t = 0; t < 200; ++t) {
      std::vector<PerceptualHash> h;
      std::uint64_t base = rng();
      for (int i = 0; i < 12; ++i) {
        if (rng() % 4 == 0) base = rng();
        std::uint64_t x = base;
        for (int f = 0; f < static_cast<int>(rng() % 8); ++f) x ^= 1ull << (rng() % 64);
        h.push_back(PerceptualHash{x});
      }
      const auto reps = ClusterRepresentatives(h, cfg);
      REQUIRE(!reps.empty());
      CHECK(reps.front() == 0);
      for (std::size_t i = 1; i < reps.size(); ++i) CHECK(reps[i] > reps[i - 1]);
      // every dropped frame is within threshold of the preceding representative
      std::size_t r = 0;
      for (std::size_t i = 0; i < h.size(); ++i) {
        while (r + 1 < reps.size() && reps[r + 1] <= i) ++r;
        if (reps[r] != i) CHECK(IsNearDuplicate(h[reps[r]], h[i], cfg));
      }
      // consecutive representatives differ from each other
      for (std::size_t i = 1; i < reps.size(); ++i) CHECK_FALSE(IsNearDuplicate(h[reps[i - 1]], h[reps[i]], cfg));
    }
  }

  TEST_CASE("shot validation") {
    const std::vector<ShotBoundary> good{{0, 9}, {10, 19}};
    CHECK_NOTHROW(ValidateShots("v", good, 20));
    const std::vector<ShotBoundary> overlap{{0, 10}, {10, 19}};
    try {
      ValidateShots("clip7", overlap, 20);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kIngest);
      CHECK(std::string(e.what()).find("clip7") != std::string::npos);
      CHECK(std::string(e.what()).find("shots[1]") != std::string::npos);
    }
    const std::vector<ShotBoundary> beyond{{0, 20}};
    CHECK_THROWS_AS(ValidateShots("v", beyond, 20), Error);
    const std::vector<ShotBoundary> inverted{{5, 4}};
    CHECK_THROWS_AS(ValidateShots("v", inverted, 20), Error);
  }

  TEST_CASE("uniform fallback shots") {
    const auto s = UniformShots(250, 120);
    REQUIRE(s.size() == 3);
    CHECK(s[0].a == 0);
    CHECK(s[0].b == 119);
    CHECK(s[2].a == 240);
    CHECK(s[2].b == 249);
    CHECK_NOTHROW(ValidateShots("v", s, 250));
  }
}
