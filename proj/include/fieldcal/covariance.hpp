#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fieldcal/matrix.hpp"
#include "fieldcal/special.hpp"

namespace fieldcal {

// Correlation hyperparameters shared by all events.
struct Hyperparameters {
  double omega = 0.0;    // rotation angle, (-pi/2, pi/2]
  double lambda2 = 0.1;  // nugget
  double phi1 = 1.0;     // range along transformed axis 1
  double phi2 = 1.0;     // range along transformed axis 2
  double nu1 = 1.5;      // smoothness along axis 1
  double nu2 = 1.5;      // smoothness along axis 2
  double phiX = 1.0;     // intensity range (m/s)

  // Throws DomainError when a constraint is violated.
  void validate() const;
};

// Maps any angle onto (-pi/2, pi/2]. Rotations that differ by pi give the same
// per-axis lags, so this is an exact symmetry of the correlation.
double wrap_omega(double omega);

struct SpacePoint {
  double s1 = 0.0;
  double s2 = 0.0;
};

inline constexpr std::int64_t kNoRecord = -1;

struct KernelPoint {
  std::size_t event = 0;
  SpacePoint location;  // transformed coordinates
  double intensity = 0.0;
  // Data record this point stands for; targets carry kNoRecord. The nugget
  // only applies to a record paired with itself.
  std::int64_t record = kNoRecord;
};

// s = T s*, T = [[cos w, -sin w], [sin w, cos w]].
SpacePoint rotate_coords(SpacePoint s_star, double omega);

double matern_1d(double h, double phi, double nu);
double intensity_kernel(double x, double x_prime, double phiX);

// exact: every call evaluates the Bessel function.
// tabulated: cubic Hermite interpolation of log c in log z on a fine grid
// built at construction (relative error below 1e-10 where c > 1e-12). For
// objective evaluations inside the optimizer.
enum class MaternEvaluation { exact, tabulated };

// Matern correlation with the order-dependent work done once.
class MaternCorrelation {
 public:
  MaternCorrelation(double phi, double nu, MaternEvaluation mode = MaternEvaluation::exact);
  double operator()(double h) const;

 private:
  double exact_log(double z, double* dlog) const;

  double nu_;
  double scale_;     // sqrt(2 nu) / phi
  double log_norm_;  // log(Gamma(nu) 2^(nu-1))
  BesselKPlan bessel_;
  // Knots of log c and its derivative in u = log z, empty when exact.
  std::vector<double> table_;
};

// The composite correlation: zero across events, 1 + lambda^2 for a record
// with itself, otherwise Matern(h1) * Matern(h2) * Gaussian(intensity gap).
class CompositeKernel {
 public:
  explicit CompositeKernel(const Hyperparameters& theta, MaternEvaluation mode = MaternEvaluation::exact);

  const Hyperparameters& theta() const noexcept { return theta_; }

  // Nugget-free part, ignoring event membership.
  double smooth(const KernelPoint& p, const KernelPoint& q) const;
  double operator()(const KernelPoint& p, const KernelPoint& q) const;

 private:
  Hyperparameters theta_;
  MaternCorrelation m1_;
  MaternCorrelation m2_;
};

// Locations within this distance (per coordinate) count as identical.
inline constexpr double kSameLocationTol = 1e-9;

double composite_correlation(const KernelPoint& p, const KernelPoint& q, const Hyperparameters& theta);

// Entries between points of different events are exactly zero, so mixed
// inputs give a block-diagonal matrix. With the nugget the diagonal is
// 1 + lambda^2, without it 1.
DenseMatrix correlation_matrix(std::span<const KernelPoint> points, const Hyperparameters& theta,
                               bool include_nugget);
DenseMatrix correlation_matrix(std::span<const KernelPoint> points, const CompositeKernel& kernel,
                               bool include_nugget);

// Smooth correlation between `target` and each point.
Vector cross_correlation_vector(const KernelPoint& target, std::span<const KernelPoint> points,
                                const Hyperparameters& theta);
Vector cross_correlation_vector(const KernelPoint& target, std::span<const KernelPoint> points,
                                const CompositeKernel& kernel);

}  // namespace fieldcal
