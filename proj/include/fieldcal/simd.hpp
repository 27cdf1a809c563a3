#pragma once
// Vector kernels used by the dense linear algebra.
//
// Every kernel has a portable scalar reference implementation plus optional
// AVX2/FMA (x86-64) and NEON (aarch64) variants. The variant is chosen once at
// runtime from the CPU features, or forced with FIELDCAL_SIMD=scalar|avx2|neon.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace fieldcal::simd {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // sum_i (a_i - b_i)^2
  double (*sum_sq_diff)(const double* a, const double* b, std::size_t n);
};

std::string_view isa_name(Isa isa);

// Variants compiled in and supported by the running CPU; scalar always first.
std::vector<Isa> available();

// nullptr when the variant is not compiled in or not supported.
const KernelTable* table(Isa isa);

// The table used by the library.
const KernelTable& active();

namespace detail {
extern const KernelTable scalar_table;
#if defined(FIELDCAL_HAVE_AVX2)
extern const KernelTable avx2_table;
#endif
#if defined(FIELDCAL_HAVE_NEON)
extern const KernelTable neon_table;
#endif
}  // namespace detail

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline double sum_sq_diff(std::span<const double> a, std::span<const double> b) {
  return active().sum_sq_diff(a.data(), b.data(), a.size());
}

}  // namespace fieldcal::simd
