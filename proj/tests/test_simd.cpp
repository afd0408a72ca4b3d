#include <cmath>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "gcl/simd/kernels.hpp"
#include "oracles.hpp"

using gcl::simd::Isa;

namespace {

std::vector<Isa> supported_isas() {
  std::vector<Isa> out{Isa::kScalar};
  if (gcl::simd::isa_supported(Isa::kAvx2)) out.push_back(Isa::kAvx2);
  return out;
}

std::vector<double> filled(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

// Error bound for a length-n sum in a different association order.
double sum_tolerance(std::size_t n, double magnitude) {
  return 4.0 * static_cast<double>(n + 1) * 1.2e-16 * (magnitude + 1.0);
}

}  // namespace

TEST_CASE("scalar table is always available") {
  CHECK(gcl::simd::isa_supported(Isa::kScalar));
  CHECK(gcl::simd::isa_name(Isa::kScalar) == "scalar");
  CHECK(gcl::simd::table_for(Isa::kScalar).dot == &gcl::simd::scalar::dot);
}

TEST_CASE("dot and sum_sq agree with the naive loop for every length and variant") {
  std::mt19937_64 rng(11);
  for (Isa isa : supported_isas()) {
    const auto& k = gcl::simd::table_for(isa);
    for (std::size_t n = 0; n <= 67; ++n) {
      const auto a = filled(rng, n);
      const auto b = filled(rng, n);
      double mag = 0.0;
      for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
      CAPTURE(gcl::simd::isa_name(isa));
      CAPTURE(n);
      CHECK(std::abs(k.dot(a.data(), b.data(), n) - oracle::naive_dot(a.data(), b.data(), n)) <=
            sum_tolerance(n, mag));
      CHECK(std::abs(k.sum_sq(a.data(), n) - oracle::naive_dot(a.data(), a.data(), n)) <=
            sum_tolerance(n, oracle::naive_dot(a.data(), a.data(), n)));
    }
  }
}

TEST_CASE("elementwise kernels match the scalar reference exactly") {
  std::mt19937_64 rng(12);
  for (Isa isa : supported_isas()) {
    const auto& k = gcl::simd::table_for(isa);
    const auto& ref = gcl::simd::table_for(Isa::kScalar);
    for (std::size_t n = 0; n <= 67; ++n) {
      const auto x = filled(rng, n);
      const auto y0 = filled(rng, n);
      CAPTURE(n);

      auto y1 = y0;
      auto y2 = y0;
      k.axpy(0.37, x.data(), y1.data(), n);
      ref.axpy(0.37, x.data(), y2.data(), n);
      // FMA rounds once where the scalar path rounds twice.
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 4e-16 * (1 + std::abs(y2[i])));

      auto s1 = x;
      auto s2 = x;
      k.scale(-1.75, s1.data(), n);
      ref.scale(-1.75, s2.data(), n);
      CHECK(s1 == s2);

      std::vector<double> d1(n), d2(n);
      k.sub(x.data(), y0.data(), d1.data(), n);
      ref.sub(x.data(), y0.data(), d2.data(), n);
      CHECK(d1 == d2);
    }
  }
}

TEST_CASE("kernels leave memory past the end untouched") {
  for (Isa isa : supported_isas()) {
    const auto& k = gcl::simd::table_for(isa);
    for (std::size_t n = 0; n <= 9; ++n) {
      std::vector<double> x(n + 4, 1.0), y(n + 4, 2.0);
      k.axpy(3.0, x.data(), y.data(), n);
      k.scale(5.0, x.data(), n);
      for (std::size_t i = n; i < n + 4; ++i) {
        CHECK(y[i] == 2.0);
        CHECK(x[i] == 1.0);
      }
    }
  }
}

TEST_CASE("force_isa switches the active table and back") {
  const Isa before = gcl::simd::active_isa();
  gcl::simd::force_isa(Isa::kScalar);
  CHECK(gcl::simd::active_isa() == Isa::kScalar);
  CHECK(gcl::simd::kernels().dot == gcl::simd::table_for(Isa::kScalar).dot);
  gcl::simd::force_isa(before);
  CHECK(gcl::simd::active_isa() == before);
}

TEST_CASE("default selection honours the CPU") {
  const char* env = std::getenv("GCL_SIMD");
  if (env != nullptr && std::string(env) == "scalar") {
    CHECK(gcl::simd::active_isa() == Isa::kScalar);
  } else if (gcl::simd::isa_supported(Isa::kAvx2)) {
    CHECK(gcl::simd::active_isa() == Isa::kAvx2);
  }
}
