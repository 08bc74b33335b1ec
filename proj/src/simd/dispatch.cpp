#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>

#include "grab/simd/kernels.hpp"

namespace grab::simd {

#if defined(GRAB_HAVE_AVX2)
const KernelTable& Avx2KernelTable();
#endif
#if defined(GRAB_HAVE_NEON)
const KernelTable& NeonKernelTable();
#endif

namespace {

bool CpuHasAvx2() {
#if defined(GRAB_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* TableFor(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return &ScalarKernels();
    case Isa::kAvx2: return Avx2Kernels();
    case Isa::kNeon: return NeonKernels();
  }
  return nullptr;
}

struct ActiveState {
  std::atomic<const KernelTable*> table{nullptr};
  std::atomic<Isa> isa{Isa::kScalar};
};

ActiveState& State() {
  static ActiveState state;
  return state;
}

}  // namespace

std::string_view IsaName(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
  }
  return "unknown";
}

const KernelTable* Avx2Kernels() {
#if defined(GRAB_HAVE_AVX2)
  static const bool supported = CpuHasAvx2();
  return supported ? &Avx2KernelTable() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* NeonKernels() {
#if defined(GRAB_HAVE_NEON)
  return &NeonKernelTable();
#else
  return nullptr;
#endif
}

Isa DetectIsa() {
  const char* env = std::getenv("GRAB_SIMD");
  const std::string requested = env != nullptr ? env : "";
  if (requested == "scalar") return Isa::kScalar;
  if (requested.empty() || requested == "avx2") {
    if (Avx2Kernels() != nullptr) return Isa::kAvx2;
  }
  if (requested.empty() || requested == "neon") {
    if (NeonKernels() != nullptr) return Isa::kNeon;
  }
  return Isa::kScalar;
}

const KernelTable& Active() {
  auto& state = State();
  const KernelTable* table = state.table.load(std::memory_order_acquire);
  if (table == nullptr) {
    const Isa isa = DetectIsa();
    table = TableFor(isa);
    state.isa.store(isa, std::memory_order_relaxed);
    state.table.store(table, std::memory_order_release);
  }
  return *table;
}

Isa ActiveIsa() {
  Active();
  return State().isa.load(std::memory_order_relaxed);
}

bool SetActiveIsa(Isa isa) {
  const KernelTable* table = TableFor(isa);
  if (table == nullptr) return false;
  State().isa.store(isa, std::memory_order_relaxed);
  State().table.store(table, std::memory_order_release);
  return true;
}

float NormalizeInPlace(std::span<float> v) {
  // Norm accumulated in double so that normalize(normalize(v)) is stable.
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  const double norm = std::sqrt(sq);
  if (norm > 0.0) {
    const double inv = 1.0 / norm;
    for (float& x : v) x = static_cast<float>(x * inv);
  }
  return static_cast<float>(norm);
}

}  // namespace grab::simd
