#include "grab/ingest/phash.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "grab/error.hpp"

namespace grab::ingest {
namespace {

constexpr int kResample = 32;
constexpr int kBlock = 8;

int HexValue(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

// Orthonormal DCT-II basis: basis[u][x] = alpha(u) * cos(pi * (2x + 1) * u / 2n).
const std::array<std::array<double, kResample>, kBlock>& DctBasis() {
  static const auto basis = [] {
    std::array<std::array<double, kResample>, kBlock> b{};
    for (int u = 0; u < kBlock; ++u) {
      const double alpha = u == 0 ? std::sqrt(1.0 / kResample) : std::sqrt(2.0 / kResample);
      for (int x = 0; x < kResample; ++x) {
        b[u][x] = alpha * std::cos(std::numbers::pi * (2 * x + 1) * u / (2.0 * kResample));
      }
    }
    return b;
  }();
  return basis;
}

void SkipPgmSpace(std::istream& in) {
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in.get();
    } else {
      return;
    }
  }
}

}  // namespace

std::string PerceptualHash::ToHex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 0; i < 16; ++i) out[i] = kDigits[(bits >> (60 - 4 * i)) & 0xf];
  return out;
}

PerceptualHash PerceptualHash::FromHex(std::string_view hex) {
  if (hex.size() != 16) {
    throw Error(ErrorCode::kInvalidInput,
                "phash hex must be 16 digits, got " + std::to_string(hex.size()));
  }
  PerceptualHash h;
  for (char c : hex) {
    const int v = HexValue(c);
    if (v < 0) throw Error(ErrorCode::kInvalidInput, "invalid hex digit in phash: " + std::string(hex));
    h.bits = (h.bits << 4) | static_cast<std::uint64_t>(v);
  }
  return h;
}

GrayImage ReadPgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open raster " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P2") {
    throw Error(ErrorCode::kInvalidInput, path.string() + ": not a PGM raster");
  }
  int width = 0, height = 0, maxval = 0;
  SkipPgmSpace(in);
  in >> width;
  SkipPgmSpace(in);
  in >> height;
  SkipPgmSpace(in);
  in >> maxval;
  if (!in || width <= 0 || height <= 0 || maxval <= 0 || maxval > 255) {
    throw Error(ErrorCode::kInvalidInput, path.string() + ": invalid PGM header");
  }
  GrayImage image{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height)};
  if (magic == "P5") {
    in.get();  // single whitespace after maxval
    in.read(reinterpret_cast<char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(image.pixels.size())) {
      throw Error(ErrorCode::kInvalidInput, path.string() + ": truncated PGM payload");
    }
  } else {
    for (auto& px : image.pixels) {
      int v = 0;
      if (!(in >> v) || v < 0 || v > maxval) {
        throw Error(ErrorCode::kInvalidInput, path.string() + ": bad ASCII PGM sample");
      }
      px = static_cast<std::uint8_t>(v);
    }
  }
  if (maxval != 255) {
    for (auto& px : image.pixels) px = static_cast<std::uint8_t>(std::lround(px * 255.0 / maxval));
  }
  return image;
}

void WritePgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write raster " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
}

std::vector<double> ResampleArea(const GrayImage& image, int size) {
  if (image.empty() || image.pixels.size() != static_cast<std::size_t>(image.width) * image.height) {
    throw Error(ErrorCode::kInvalidInput, "empty or malformed raster");
  }
  // Each output cell covers [i*sx, (i+1)*sx) source pixels; partial source
  // pixels contribute by their overlap fraction.
  const double sx = static_cast<double>(image.width) / size;
  const double sy = static_cast<double>(image.height) / size;
  std::vector<double> out(static_cast<std::size_t>(size) * size, 0.0);
  for (int oy = 0; oy < size; ++oy) {
    const double y0 = oy * sy, y1 = (oy + 1) * sy;
    for (int ox = 0; ox < size; ++ox) {
      const double x0 = ox * sx, x1 = (ox + 1) * sx;
      double acc = 0.0;
      for (int y = static_cast<int>(std::floor(y0)); y < std::min(image.height, static_cast<int>(std::ceil(y1))); ++y) {
        const double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
        if (wy <= 0) continue;
        const std::uint8_t* row = image.pixels.data() + static_cast<std::size_t>(y) * image.width;
        for (int x = static_cast<int>(std::floor(x0)); x < std::min(image.width, static_cast<int>(std::ceil(x1))); ++x) {
          const double wx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
          if (wx <= 0) continue;
          acc += wx * wy * row[x];
        }
      }
      out[static_cast<std::size_t>(oy) * size + ox] = acc / (sx * sy);
    }
  }
  return out;
}

PerceptualHash ComputePhash(const GrayImage& image) {
  const std::vector<double> small = ResampleArea(image, kResample);
  const auto& basis = DctBasis();

  // Separable transform restricted to the 8 lowest frequencies per axis.
  std::array<std::array<double, kResample>, kBlock> rows_dct{};  // [v][y]
  for (int y = 0; y < kResample; ++y) {
    for (int v = 0; v < kBlock; ++v) {
      double acc = 0.0;
      for (int x = 0; x < kResample; ++x) acc += basis[v][x] * small[y * kResample + x];
      rows_dct[v][y] = acc;
    }
  }
  std::array<double, kBlock * kBlock> coeffs{};
  for (int u = 0; u < kBlock; ++u) {
    for (int v = 0; v < kBlock; ++v) {
      double acc = 0.0;
      for (int y = 0; y < kResample; ++y) acc += basis[u][y] * rows_dct[v][y];
      coeffs[u * kBlock + v] = acc;
    }
  }

  auto sorted = coeffs;
  std::sort(sorted.begin(), sorted.end());
  const double median = 0.5 * (sorted[31] + sorted[32]);

  PerceptualHash hash;
  for (int k = 0; k < 64; ++k) {
    if (coeffs[k] > median) hash.bits |= std::uint64_t{1} << (63 - k);
  }
  return hash;
}

int HammingDistance(PerceptualHash a, PerceptualHash b) {
  return std::popcount(a.bits ^ b.bits);
}

int HammingDistance(std::string_view hex_a, std::string_view hex_b) {
  if (hex_a.size() != hex_b.size()) {
    throw Error(ErrorCode::kInvalidInput, "hash length mismatch: " + std::to_string(hex_a.size()) +
                                              " vs " + std::to_string(hex_b.size()));
  }
  return HammingDistance(PerceptualHash::FromHex(hex_a), PerceptualHash::FromHex(hex_b));
}

}  // namespace grab::ingest
