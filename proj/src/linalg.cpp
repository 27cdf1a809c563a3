#include "fieldcal/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>

#include "fieldcal/error.hpp"
#include "fieldcal/simd.hpp"

namespace fieldcal {
namespace {

// Returns the lower factor, or nullopt at the first non-positive pivot.
std::optional<DenseMatrix> try_factor(const DenseMatrix& a, double jitter) {
  const std::size_t n = a.rows();
  DenseMatrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    auto li = l.row(i);
    for (std::size_t j = 0; j <= i; ++j) {
      const auto lj = l.row(j);
      double s = a(i, j) - simd::dot(li.first(j), lj.first(j));
      if (i == j) {
        s += jitter;
        if (!(s > 0.0) || !std::isfinite(s)) return std::nullopt;
        li[i] = std::sqrt(s);
      } else {
        li[j] = s / lj[j];
      }
    }
  }
  return l;
}

}  // namespace

CholeskyFactor cholesky(const DenseMatrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw DimensionMismatch("cholesky needs a non-empty square matrix");
  if (!a.is_symmetric()) throw DomainError("cholesky input is not symmetric");

  CholeskyFactor f;
  auto l = try_factor(a, 0.0);
  if (!l) {
    const double jitter = 1e-8 * a.trace() / static_cast<double>(a.rows());
    if (jitter > 0.0) l = try_factor(a, jitter);
    if (!l) throw NotPositiveDefinite("matrix is not positive definite (after jitter)");
    f.jitter_ = jitter;
  }
  f.lower_ = std::move(*l);
  double logdet = 0.0;
  for (std::size_t i = 0; i < f.lower_.rows(); ++i) logdet += std::log(f.lower_(i, i));
  f.logdet_ = 2.0 * logdet;
  return f;
}

void CholeskyFactor::solve_lower_in_place(std::span<double> b) const {
  const std::size_t n = size();
  if (b.size() != n) throw DimensionMismatch("triangular solve dimensions");
  for (std::size_t i = 0; i < n; ++i) {
    const auto li = lower_.row(i);
    b[i] = (b[i] - simd::dot(li.first(i), b.first(i))) / li[i];
  }
}

void CholeskyFactor::solve_upper_in_place(std::span<double> b) const {
  const std::size_t n = size();
  if (b.size() != n) throw DimensionMismatch("triangular solve dimensions");
  for (std::size_t i = n; i-- > 0;) {
    const auto li = lower_.row(i);
    b[i] /= li[i];
    simd::axpy(-b[i], li.first(i), b.first(i));
  }
}

Vector CholeskyFactor::solve(std::span<const double> b) const {
  Vector x(b.begin(), b.end());
  solve_lower_in_place(x);
  solve_upper_in_place(x);
  return x;
}

DenseMatrix CholeskyFactor::solve(const DenseMatrix& b) const {
  if (b.rows() != size()) throw DimensionMismatch("solve dimensions");
  DenseMatrix x(b.rows(), b.cols());
  Vector col(b.rows());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    for (std::size_t i = 0; i < b.rows(); ++i) col[i] = b(i, j);
    solve_lower_in_place(col);
    solve_upper_in_place(col);
    for (std::size_t i = 0; i < b.rows(); ++i) x(i, j) = col[i];
  }
  return x;
}

DenseMatrix CholeskyFactor::inverse() const {
  DenseMatrix inv = solve(DenseMatrix::identity(size()));
  inv.symmetrize();
  return inv;
}

DenseMatrix CholeskyFactor::reconstruct() const {
  const std::size_t n = size();
  DenseMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = simd::dot(lower_.row(i).first(j + 1), lower_.row(j).first(j + 1));
      a(i, j) = v;
      a(j, i) = v;
    }
  return a;
}

PivotedCholeskyFactor pivoted_cholesky(const DenseMatrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw DimensionMismatch("pivoted cholesky needs a square matrix");
  if (!a.is_symmetric()) throw DomainError("pivoted cholesky input is not symmetric");
  const std::size_t n = a.rows();

  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, a(i, i));
  const double stop_tol = 1e-10 * max_diag;
  const double neg_tol = -1e-8 * max_diag;

  DenseMatrix w = a;
  PivotedCholeskyFactor f;
  f.permutation.resize(n);
  for (std::size_t i = 0; i < n; ++i) f.permutation[i] = i;
  f.upper = DenseMatrix(n, n);
  DenseMatrix& u = f.upper;

  std::size_t k = 0;
  for (; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k; i < n; ++i) {
      if (w(i, i) < neg_tol) throw NotPSD("matrix is not positive semi-definite");
      if (w(i, i) > w(p, p)) p = i;
    }
    if (w(p, p) <= stop_tol) break;

    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(w(k, j), w(p, j));
      for (std::size_t i = 0; i < n; ++i) std::swap(w(i, k), w(i, p));
      for (std::size_t i = 0; i < k; ++i) std::swap(u(i, k), u(i, p));
      std::swap(f.permutation[k], f.permutation[p]);
    }

    const double pivot = std::sqrt(w(k, k));
    u(k, k) = pivot;
    for (std::size_t j = k + 1; j < n; ++j) u(k, j) = w(k, j) / pivot;
    const auto uk = u.row(k);
    for (std::size_t i = k + 1; i < n; ++i) {
      // Update the trailing block row i, columns > k.
      simd::axpy(-uk[i], uk.subspan(k + 1), w.row(i).subspan(k + 1));
    }
  }
  f.rank = k;
  return f;
}

DenseMatrix PivotedCholeskyFactor::g() const {
  const std::size_t n = upper.rows();
  DenseMatrix out(n, n);
  // (P U^T)(perm[k], j) = U(j, k)
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j) out(permutation[k], j) = upper(j, k);
  return out;
}

}  // namespace fieldcal
