#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace grab::ingest {

// 64-bit perceptual hash. Bit k of the 8x8 coefficient block (row-major,
// k = row * 8 + col) is stored at bit position 63 - k, so the hex form reads
// the block in order.
struct PerceptualHash {
  static constexpr int kBits = 64;

  std::uint64_t bits = 0;

  std::string ToHex() const;
  // Exactly 16 hex digits, case-insensitive.
  static PerceptualHash FromHex(std::string_view hex);

  friend bool operator==(const PerceptualHash&, const PerceptualHash&) = default;
};

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, width * height

  bool empty() const { return width <= 0 || height <= 0 || pixels.empty(); }
};

// Binary (P5) or ASCII (P2) PGM with maxval <= 255.
GrayImage ReadPgm(const std::filesystem::path& path);
void WritePgm(const std::filesystem::path& path, const GrayImage& image);

// Area-weighted resample of `image` to `size` x `size`, values in [0, 255].
std::vector<double> ResampleArea(const GrayImage& image, int size);

// Recipe: area resample to 32x32, orthonormal 2-D DCT-II, keep the top-left
// 8x8 block (DC included), bit k set iff coefficient k > median of the 64.
PerceptualHash ComputePhash(const GrayImage& image);

int HammingDistance(PerceptualHash a, PerceptualHash b);
// Hex-string form; throws kInvalidInput when the lengths differ or a string
// is not a 16-digit hash.
int HammingDistance(std::string_view hex_a, std::string_view hex_b);

}  // namespace grab::ingest
