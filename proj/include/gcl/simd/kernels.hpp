#pragma once

// Dense double-precision inner-loop kernels.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The active table is picked once at startup from CPUID;
// setting GCL_SIMD=scalar in the environment pins the reference kernels.
// Variants agree to within rounding (they sum in a different order), so
// bitwise reproducibility holds per ISA, not across ISAs.

#include <cstddef>
#include <string_view>

namespace gcl::simd {

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum_sq)(const double* a, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // x *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
  // out = a - b
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
};

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double sum_sq(const double* a, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define GCL_HAVE_AVX2_KERNELS 1
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double sum_sq(const double* a, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
}  // namespace avx2
#endif

/// True when the running CPU can execute kernels for `isa`.
bool isa_supported(Isa isa);

/// Kernel table for a specific ISA. Throws if unsupported on this CPU.
const KernelTable& table_for(Isa isa);

/// Currently active ISA.
Isa active_isa();

/// Active kernel table.
const KernelTable& kernels();

/// Pin the active ISA (tests and benchmarks). Throws if unsupported.
void force_isa(Isa isa);

}  // namespace gcl::simd
