#include <cmath>
#include <numbers>

#include "grab/error.hpp"
#include "grab/eval/eval.hpp"

namespace grab::eval {

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::NextU64() { return engine_(); }

double Rng::Uniform() { return static_cast<double>(NextU64() >> 11) * 0x1.0p-53; }

double Rng::Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

std::int64_t Rng::Integer(std::int64_t lo, std::int64_t hi) {
  if (hi <= lo) throw Error(ErrorCode::kInvalidInput, "empty integer range");
  const auto span = static_cast<double>(hi - lo);
  const auto v = lo + static_cast<std::int64_t>(std::floor(Uniform() * span));
  return v < hi ? v : hi - 1;
}

double Rng::Normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + stddev * spare_;
  }
  const double u1 = 1.0 - Uniform();  // (0, 1]
  const double u2 = Uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
  has_spare_ = true;
  return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<float> Rng::UnitVector(std::size_t dim) {
  std::vector<double> v(dim);
  double n2 = 0;
  do {
    n2 = 0;
    for (auto& x : v) {
      x = Normal();
      n2 += x * x;
    }
  } while (n2 == 0);
  const double inv = 1.0 / std::sqrt(n2);
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] * inv);
  return out;
}

std::vector<std::int64_t> Rng::Sample(std::vector<std::int64_t> pool, std::size_t k) {
  k = std::min(k, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(Integer(static_cast<std::int64_t>(i), static_cast<std::int64_t>(pool.size())));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

// splitmix64 finalizer over (seed, trial).
std::uint64_t TrialSeed(std::uint64_t seed, std::uint64_t trial) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (trial + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace grab::eval
