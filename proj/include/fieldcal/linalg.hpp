#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fieldcal/matrix.hpp"

namespace fieldcal {

// A = L L^T for symmetric positive definite A.
class CholeskyFactor {
 public:
  CholeskyFactor() = default;

  std::size_t size() const noexcept { return lower_.rows(); }
  const DenseMatrix& lower() const noexcept { return lower_; }
  double logdet() const noexcept { return logdet_; }
  // Diagonal jitter that was added before the factorization succeeded (0 if none).
  double jitter() const noexcept { return jitter_; }

  // In place: b <- L^{-1} b
  void solve_lower_in_place(std::span<double> b) const;
  // In place: b <- L^{-T} b
  void solve_upper_in_place(std::span<double> b) const;

  // A^{-1} b
  Vector solve(std::span<const double> b) const;
  // A^{-1} B, column by column
  DenseMatrix solve(const DenseMatrix& b) const;
  // A^{-1}
  DenseMatrix inverse() const;

  DenseMatrix reconstruct() const;

 private:
  friend CholeskyFactor cholesky(const DenseMatrix& a);
  DenseMatrix lower_;
  double logdet_ = 0.0;
  double jitter_ = 0.0;
};

// Throws NotPositiveDefinite when the matrix is not PD even after one diagonal
// jitter of 1e-8 * trace / n, and DomainError for a non-symmetric input.
CholeskyFactor cholesky(const DenseMatrix& a);

// P^T A P = U^T U with greedy maximum-diagonal pivoting.
struct PivotedCholeskyFactor {
  // permutation[k] is the original index placed at position k (0-based).
  std::vector<std::size_t> permutation;
  DenseMatrix upper;  // n x n; rows at and beyond `rank` are zero
  std::size_t rank = 0;

  // G = P U^T, so that G G^T = A.
  DenseMatrix g() const;
};

// Stops once the largest residual pivot falls below 1e-10 * max diag(A).
// Throws NotPSD when a residual diagonal entry is below -1e-8 * max diag(A).
PivotedCholeskyFactor pivoted_cholesky(const DenseMatrix& a);

}  // namespace fieldcal
