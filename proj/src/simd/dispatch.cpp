#include <atomic>
#include <cstdlib>
#include <string>

#include "gcl/errors.hpp"
#include "gcl/simd/kernels.hpp"

namespace gcl::simd {

namespace {

constexpr KernelTable kScalarTable{&scalar::dot, &scalar::sum_sq, &scalar::axpy,
                                   &scalar::scale, &scalar::sub};

#ifdef GCL_HAVE_AVX2_KERNELS
constexpr KernelTable kAvx2Table{&avx2::dot, &avx2::sum_sq, &avx2::axpy, &avx2::scale,
                                 &avx2::sub};
#endif

Isa detect() {
  if (const char* env = std::getenv("GCL_SIMD"); env != nullptr && std::string(env) == "scalar") {
    return Isa::kScalar;
  }
  if (isa_supported(Isa::kAvx2)) return Isa::kAvx2;
  return Isa::kScalar;
}

struct Active {
  std::atomic<Isa> isa;
  std::atomic<const KernelTable*> table;
};

Active& active() {
  static Active state{detect(), &table_for(detect())};
  return state;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(GCL_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
      __builtin_cpu_init();
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table_for(Isa isa) {
  if (!isa_supported(isa)) {
    throw Error("SIMD variant not supported on this CPU: " + std::string(isa_name(isa)));
  }
#ifdef GCL_HAVE_AVX2_KERNELS
  if (isa == Isa::kAvx2) return kAvx2Table;
#endif
  return kScalarTable;
}

Isa active_isa() { return active().isa.load(std::memory_order_relaxed); }

const KernelTable& kernels() { return *active().table.load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  const KernelTable& table = table_for(isa);
  active().table.store(&table, std::memory_order_relaxed);
  active().isa.store(isa, std::memory_order_relaxed);
}

}  // namespace gcl::simd
