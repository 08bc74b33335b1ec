#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "doctest.h"
#include "grab/error.hpp"
#include "grab/store/embedding_store.hpp"
#include "test_util.hpp"

using namespace grab;
using namespace grab::store;

namespace {

EmbeddingStore::Builder::Video SequenceVideo(const std::string& id, double fps, std::int64_t frames, std::int64_t stride,
                                             std::size_t dim, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  EmbeddingStore::Builder::Video v;
  v.video_id = id;
  v.fps = fps;
  v.frame_count = frames;
  v.stride = stride;
  v.keyframes = {{0, 0, std::nullopt}};
  v.keyframe_vectors = grab::test::RandomVectors(rng, 1, dim);
  v.sequence_vectors = grab::test::RandomVectors(rng, static_cast<std::size_t>((frames + stride - 1) / stride), dim);
  return v;
}

}  // namespace

TEST_SUITE("store") {
  TEST_CASE("normalization at load") {
    const auto store = grab::test::FlatStore({3.f, 4.f}, 2);
    CHECK(store->rows() == 1);
    CHECK(store->row(0)[0] == doctest::Approx(0.6f));
    CHECK(store->row(0)[1] == doctest::Approx(0.8f));
  }

  TEST_CASE("every row is unit norm and normalization is idempotent") {
    std::mt19937_64 rng(2);
    const auto store = grab::test::FlatStore(grab::test::RandomVectors(rng, 300, 33), 33);
    for (std::size_t r = 0; r < store->rows(); ++r) {
      double n = 0;
      for (float x : store->row(r)) n += double(x) * x;
      CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-5));
      std::vector<float> again(store->row(r).begin(), store->row(r).end());
      NormalizeRows(again, 33);
      for (std::size_t i = 0; i < 33; ++i) CHECK(again[i] == doctest::Approx(store->row(r)[i]).epsilon(1e-6));
    }
  }

  TEST_CASE("invalid rows are rejected naming the row") {
    for (float bad : {0.f, NAN, INFINITY}) {
      std::vector<float> v{1.f, 0.f, bad, bad == 0.f ? 0.f : 1.f};
      try {
        grab::test::FlatStore(v, 2, "vid");
        FAIL("expected load error");
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kLoad);
        CHECK(std::string(e.what()).find("row 1") != std::string::npos);
      }
    }
  }

  TEST_CASE("empty manifest gives empty store") {
    CorpusManifest m;
    CHECK(EmbeddingStore::Load(m)->empty());
  }

  TEST_CASE("lookup and not-found") {
    const auto store = grab::test::FlatStore({1.f, 0.f, 0.f, 1.f}, 2, "vid");
    const auto a = store->GetKeyframeEmbedding("vid", 1);
    const auto b = store->GetKeyframeEmbedding("vid", 1);
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
    CHECK(a[1] == 1.f);
    CHECK_THROWS_AS(store->GetKeyframeEmbedding("vid", 7), Error);
    CHECK_THROWS_AS(store->GetKeyframeEmbedding("nope", 0), Error);
    try {
      store->GetVideo("nope");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kNotFound);
    }
  }

  TEST_CASE("tie rank follows (video_id, frame_index)") {
    EmbeddingStore::Builder b(2);
    EmbeddingStore::Builder::Video z{"z", 1.0, 3, {{2, 0, std::nullopt}, {0, 0, std::nullopt}}, {1, 0, 1, 0}, 1, {}};
    EmbeddingStore::Builder::Video a{"a", 1.0, 3, {{1, 0, std::nullopt}}, {1, 0}, 1, {}};
    b.AddVideo(z).AddVideo(a);
    const auto s = b.Build();
    const auto za0 = *s->FindRow("z", 0), za2 = *s->FindRow("z", 2), aa1 = *s->FindRow("a", 1);
    CHECK(s->tie_rank(aa1) < s->tie_rank(za0));
    CHECK(s->tie_rank(za0) < s->tie_rank(za2));
  }

  TEST_CASE("frame window on the stride grid") {
    const auto s = EmbeddingStore::Builder(4).AddVideo(SequenceVideo("v", 30.0, 1800, 6, 4)).Build();
    const auto w = s->GetFrameWindow("v", 900, 10.0);
    REQUIRE(w.size() == 101);
    CHECK(w.front().frame_index == 600);
    CHECK(w.back().frame_index == 1200);
    for (std::size_t i = 1; i < w.size(); ++i) CHECK(w[i].frame_index - w[i - 1].frame_index == 6);

    const auto zero = s->GetFrameWindow("v", 904, 0.0);  // nearest grid frame: 906 (2 away) vs 900 (4 away)
    REQUIRE(zero.size() == 1);
    CHECK(zero[0].frame_index == 906);
    const auto tie = s->GetFrameWindow("v", 903, 0.0);  // equidistant: earlier frame
    REQUIRE(tie.size() == 1);
    CHECK(tie[0].frame_index == 900);

    const auto left = s->GetFrameWindow("v", 0, 2.0);
    CHECK(left.front().frame_index == 0);
    CHECK(left.back().frame_index == 60);

    const auto right = s->GetFrameWindow("v", 1799, 1.0);
    CHECK(right.back().frame_index == 1794);  // last grid frame inside the video
    for (const auto& f : right) CHECK(f.frame_index >= 1769);
  }

  TEST_CASE("frame window needs sequence embeddings") {
    const auto s = grab::test::FlatStore({1.f, 0.f}, 2);
    try {
      s->GetFrameWindow("v", 0, 1.0);
      FAIL("expected capability error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kCapability);
    }
  }

  TEST_CASE("sequence row count is checked") {
    auto v = SequenceVideo("v", 25.0, 100, 5, 3);
    v.sequence_vectors.resize(v.sequence_vectors.size() - 3);
    CHECK_THROWS_AS(EmbeddingStore::Builder(3).AddVideo(v).Build(), Error);
  }

  TEST_CASE("manifest and blob round trip is bit-exact") {
    grab::test::TempDir dir;
    std::mt19937_64 rng(9);
    auto raw = grab::test::RandomVectors(rng, 5, 7);
    raw[3] = -0.0f;
    raw[4] = 1e-30f;
    WriteF32Blob(dir / "v.f32", raw);
    const auto back = ReadF32Blob(dir / "v.f32", 5, 7);
    CHECK(std::memcmp(back.data(), raw.data(), raw.size() * 4) == 0);

    // little-endian on disk
    std::ifstream in(dir / "v.f32", std::ios::binary);
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    std::uint32_t bits;
    std::memcpy(&bits, &raw[0], 4);
    CHECK(bytes[0] == (bits & 0xff));
    CHECK(bytes[3] == (bits >> 24));

    CorpusManifest m;
    m.dim = 7;
    m.thumbnail_template = "thumbs/{video_id}/{frame_index}.jpg";
    VideoEntry e;
    e.video_id = "v";
    e.fps = 25;
    e.frame_count = 100;
    e.duration_s = 4;
    e.embedding_file = "v.f32";
    e.dim = 7;
    for (int k = 0; k < 5; ++k) e.keyframes.push_back({k * 10, k / 2, std::nullopt});
    e.keyframes[1].phash = grab::ingest::PerceptualHash{0xabcdefull};
    m.videos.push_back(e);
    SaveManifest(m, dir / "corpus.json");
    const auto loaded = LoadManifest(dir / "corpus.json");
    CHECK(ManifestToJson(loaded).dump() == ManifestToJson(m).dump());
    const auto store = EmbeddingStore::Load(dir / "corpus.json");
    CHECK(store->rows() == 5);
    CHECK(store->row_info(1).phash->bits == 0xabcdefull);
    CHECK(store->row_info(1).timestamp_s == doctest::Approx(0.4));
  }

  TEST_CASE("blob size mismatch is a load error") {
    grab::test::TempDir dir;
    WriteF32Blob(dir / "v.f32", {1.f, 2.f, 3.f});
    CHECK_THROWS_AS(ReadF32Blob(dir / "v.f32", 2, 2), Error);
    std::ofstream(dir / "odd.f32") << "abcde";
    CHECK_THROWS_AS(ReadF32Blob(dir / "odd.f32"), Error);
  }

  TEST_CASE("manifest validation") {
    const auto bad_dtype = nlohmann::json::parse(R"({"dim": 2, "videos": [{"video_id": "v", "fps": 1, "frame_count": 1,
        "duration_s": 1, "embedding_file": "x", "dim": 2, "dtype": "f16", "keyframes": []}]})");
    CHECK_THROWS_AS(ManifestFromJson(bad_dtype, ".").Validate(), Error);
    const auto bad_dim = nlohmann::json::parse(R"({"dim": 3, "videos": [{"video_id": "v", "fps": 1, "frame_count": 1,
        "duration_s": 1, "embedding_file": "x", "dim": 2, "dtype": "f32le", "keyframes": []}]})");
    CHECK_THROWS_AS(ManifestFromJson(bad_dim, ".").Validate(), Error);
  }
}
