#include <fstream>
#include <cstdint>
#include <random>

#include "doctest.h"
#include "grab/error.hpp"
#include "grab/ingest/keyframes.hpp"
#include "grab/ingest/phash.hpp"
#include "test_util.hpp"

using namespace grab;
using namespace grab::ingest;

namespace {

// Same generators as tests/oracles/phash_oracle.py.
GrayImage XorshiftImage(int w, int h, std::uint32_t x = 2463534242u) {
  GrayImage img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h)};
  for (auto& px : img.pixels) {
    x ^= x << 13;
    x ^= x >> 17;
    x ^= x << 5;
    px = static_cast<std::uint8_t>(x >> 24);
  }
  return img;
}

GrayImage GradientImage(int w, int h) {
  GrayImage img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.pixels[static_cast<std::size_t>(y) * w + x] = static_cast<std::uint8_t>((2 * x + 3 * y) % 256);
  return img;
}

GrayImage ConstantImage(int w, int h, std::uint8_t v) {
  return {w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, v)};
}

}  // namespace

TEST_SUITE("phash") {
  TEST_CASE("golden hashes from the scipy reference") {
    const auto noise = XorshiftImage(64, 48);
    REQUIRE(noise.pixels[0] == 43);
    REQUIRE(noise.pixels[1] == 148);
    CHECK(ComputePhash(noise).ToHex() == "b9d5ed244b50a7c1");
    CHECK(ComputePhash(GradientImage(100, 75)).ToHex() == "c097304f5a771ce9");
  }

  TEST_CASE("determinism and re-encoding") {
    grab::test::TempDir dir;
    const auto img = XorshiftImage(40, 30, 99);
    CHECK(ComputePhash(img) == ComputePhash(img));
    WritePgm(dir / "a.pgm", img);
    const auto back = ReadPgm(dir / "a.pgm");
    CHECK(back.pixels == img.pixels);
    CHECK(HammingDistance(ComputePhash(img), ComputePhash(back)) == 0);
  }

  TEST_CASE("constant vs noise is far apart") {
    CHECK(HammingDistance(ComputePhash(ConstantImage(64, 48, 128)), ComputePhash(XorshiftImage(64, 48))) >= 16);
  }

  TEST_CASE("empty raster is rejected") {
    CHECK_THROWS_AS(ComputePhash(GrayImage{}), Error);
  }

  TEST_CASE("ascii pgm") {
    grab::test::TempDir dir;
    {
      std::ofstream out(dir / "b.pgm");
      out << "P2\n# comment\n2 2\n15\n0 15\n5 10\n";
    }
    const auto img = ReadPgm(dir / "b.pgm");
    CHECK(img.width == 2);
    CHECK(img.pixels == std::vector<std::uint8_t>{0, 255, 85, 170});
  }

  TEST_CASE("hamming distance") {
    const PerceptualHash h{0x0123456789abcdefull};
    CHECK(HammingDistance(h, h) == 0);
    CHECK(HammingDistance(h, PerceptualHash{~h.bits}) == 64);
    CHECK(HammingDistance(PerceptualHash{0x0FFFull}, PerceptualHash{0}) == 12);
    CHECK(HammingDistance("0000000000000fff", "0000000000000000") == 12);
    CHECK_THROWS_AS(HammingDistance("0fff", "0000000000000000"), Error);
  }

  TEST_CASE("hamming is a metric on random hashes") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 500; ++i) {
      const PerceptualHash a{rng()}, b{rng()}, c{rng()};
      CHECK(HammingDistance(a, b) == HammingDistance(b, a));
      CHECK(HammingDistance(a, c) <= HammingDistance(a, b) + HammingDistance(b, c));
    }
  }

  TEST_CASE("hex round trip and validation") {
    const PerceptualHash h{0xfedcba9876543210ull};
    CHECK(h.ToHex() == "fedcba9876543210");
    CHECK(PerceptualHash::FromHex("FEDCBA9876543210") == h);
    CHECK_THROWS_AS(PerceptualHash::FromHex("xyz"), Error);
    CHECK_THROWS_AS(PerceptualHash::FromHex("fedcba987654321g"), Error);
  }
}
