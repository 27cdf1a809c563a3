#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fieldcal/simd.hpp"

using namespace fieldcal;

namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST_CASE("scalar variant is always available and listed first") {
  const auto isas = simd::available();
  REQUIRE_FALSE(isas.empty());
  CHECK(isas.front() == simd::Isa::scalar);
  CHECK(simd::table(simd::Isa::scalar) == &simd::detail::scalar_table);
  CHECK(simd::isa_name(simd::active().isa).size() > 0);
}

TEST_CASE("every available variant matches the scalar reference") {
  std::mt19937_64 rng(11);
  const auto& ref = simd::detail::scalar_table;
  for (simd::Isa isa : simd::available()) {
    const simd::KernelTable* t = simd::table(isa);
    REQUIRE(t != nullptr);
    CAPTURE(simd::isa_name(isa));
    // Lengths around the vector widths and unroll factors, including the tails.
    for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 33u, 64u, 255u, 1000u}) {
      CAPTURE(n);
      const auto a = random_vector(n, rng), b = random_vector(n, rng);
      double mag = 0.0;
      for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
      CHECK(std::abs(t->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= 1e-14 * (mag + 1.0));

      double ssq = 0.0;
      for (std::size_t i = 0; i < n; ++i) ssq += (a[i] - b[i]) * (a[i] - b[i]);
      CHECK(std::abs(t->sum_sq_diff(a.data(), b.data(), n) - ref.sum_sq_diff(a.data(), b.data(), n)) <=
            1e-14 * (ssq + 1.0));

      auto y1 = b, y2 = b;
      t->axpy(0.37, a.data(), y1.data(), n);
      ref.axpy(0.37, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-15 * (std::abs(y2[i]) + 1.0));
    }
  }
}

TEST_CASE("kernels handle unaligned spans") {
  std::mt19937_64 rng(5);
  const auto a = random_vector(40, rng), b = random_vector(40, rng);
  for (simd::Isa isa : simd::available()) {
    const simd::KernelTable* t = simd::table(isa);
    for (std::size_t off = 1; off < 4; ++off) {
      const double got = t->dot(a.data() + off, b.data() + off, 33);
      const double want = simd::detail::scalar_table.dot(a.data() + off, b.data() + off, 33);
      CHECK(got == doctest::Approx(want).epsilon(1e-13));
    }
  }
}

TEST_CASE("span wrappers use the active table") {
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  CHECK(simd::dot(a, b) == 32.0);
  CHECK(simd::sum_sq_diff(a, b) == 27.0);
  std::vector<double> y{1, 1, 1};
  simd::axpy(2.0, a, y);
  CHECK(y == std::vector<double>{3, 5, 7});
}
