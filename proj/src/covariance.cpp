#include "fieldcal/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fieldcal/error.hpp"

namespace fieldcal {

void Hyperparameters::validate() const {
  const double half_pi = 0.5 * std::numbers::pi;
  if (!(omega > -half_pi && omega <= half_pi)) throw DomainError("omega must lie in (-pi/2, pi/2]");
  if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) throw DomainError("lambda2 must be >= 0");
  if (!(phi1 > 0.0) || !(phi2 > 0.0) || !std::isfinite(phi1) || !std::isfinite(phi2))
    throw DomainError("spatial ranges must be > 0");
  if (!(nu1 > 0.0) || !(nu2 > 0.0) || nu1 > 50.0 || nu2 > 50.0) throw DomainError("smoothness must lie in (0, 50]");
  if (!(phiX > 0.0) || !std::isfinite(phiX)) throw DomainError("intensity range must be > 0");
}

double wrap_omega(double omega) {
  const double pi = std::numbers::pi;
  double w = std::fmod(omega, pi);  // (-pi, pi)
  if (w <= -0.5 * pi) w += pi;
  if (w > 0.5 * pi) w -= pi;
  return w;
}

SpacePoint rotate_coords(SpacePoint s_star, double omega) {
  const double c = std::cos(omega);
  const double s = std::sin(omega);
  return {c * s_star.s1 - s * s_star.s2, s * s_star.s1 + c * s_star.s2};
}

namespace {

constexpr double kTableLogLo = -6.907755278982137;  // log(1e-3)
constexpr double kTableStep = 0.004;
const double kTableLogHi = std::log(kBesselUnderflowX);

}  // namespace

MaternCorrelation::MaternCorrelation(double phi, double nu, MaternEvaluation mode)
    : nu_(nu),
      scale_(std::sqrt(2.0 * nu) / phi),
      log_norm_(std::lgamma(nu) + (nu - 1.0) * std::numbers::ln2),
      bessel_(nu) {
  if (!(phi > 0.0)) throw DomainError("matern: range must be > 0");
  if (mode == MaternEvaluation::tabulated) {
    const auto knots = static_cast<std::size_t>(std::ceil((kTableLogHi - kTableLogLo) / kTableStep)) + 2;
    table_.resize(2 * knots);
    for (std::size_t k = 0; k < knots; ++k) {
      const double z = std::exp(kTableLogLo + kTableStep * static_cast<double>(k));
      double d = 0.0;
      table_[2 * k] = exact_log(z, &d);
      table_[2 * k + 1] = d * kTableStep;
    }
  }
}

// log c(z) and d log c / d log z = 2 nu - z K_{nu+1}(z) / K_nu(z).
double MaternCorrelation::exact_log(double z, double* dlog) const {
  double ratio = 0.0;
  const double lk = bessel_.log_value(z, &ratio);
  if (dlog) *dlog = 2.0 * nu_ - z * ratio;
  return nu_ * std::log(z) + lk - log_norm_;
}

double MaternCorrelation::operator()(double h) const {
  const double z = scale_ * std::abs(h);
  if (z == 0.0) return 1.0;
  if (z > kBesselUnderflowX) return 0.0;
  double log_c;
  const double u = std::log(z);
  if (!table_.empty() && u >= kTableLogLo) {
    const double t = (u - kTableLogLo) / kTableStep;
    const auto i = static_cast<std::size_t>(t);
    const double s = t - static_cast<double>(i);
    const double* k = table_.data() + 2 * i;
    const double s1 = 1.0 - s;
    log_c = s1 * s1 * ((1.0 + 2.0 * s) * k[0] + s * k[1]) + s * s * ((3.0 - 2.0 * s) * k[2] - s1 * k[3]);
  } else {
    log_c = exact_log(z, nullptr);
  }
  return log_c >= 0.0 ? 1.0 : std::exp(log_c);
}

double matern_1d(double h, double phi, double nu) {
  if (!(phi > 0.0)) throw DomainError("matern: range must be > 0");
  if (!(nu > 0.0)) throw DomainError("matern: smoothness must be > 0");
  if (h < 0.0) throw DomainError("matern: lag must be >= 0");
  return MaternCorrelation(phi, nu)(h);
}

double intensity_kernel(double x, double x_prime, double phiX) {
  if (!(phiX > 0.0)) throw DomainError("intensity kernel: range must be > 0");
  const double r = (x - x_prime) / phiX;
  return std::exp(-r * r);
}

CompositeKernel::CompositeKernel(const Hyperparameters& theta, MaternEvaluation mode)
    : theta_(theta), m1_(theta.phi1, theta.nu1, mode), m2_(theta.phi2, theta.nu2, mode) {
  theta_.validate();
}

double CompositeKernel::smooth(const KernelPoint& p, const KernelPoint& q) const {
  const double r = (p.intensity - q.intensity) / theta_.phiX;
  const double ci = std::exp(-r * r);
  if (ci == 0.0) return 0.0;
  const double c1 = m1_(p.location.s1 - q.location.s1);
  if (c1 == 0.0) return 0.0;
  return c1 * m2_(p.location.s2 - q.location.s2) * ci;
}

double CompositeKernel::operator()(const KernelPoint& p, const KernelPoint& q) const {
  if (p.event != q.event) return 0.0;
  if (p.record != kNoRecord && p.record == q.record &&
      std::abs(p.location.s1 - q.location.s1) <= kSameLocationTol &&
      std::abs(p.location.s2 - q.location.s2) <= kSameLocationTol) {
    return 1.0 + theta_.lambda2;
  }
  return smooth(p, q);
}

double composite_correlation(const KernelPoint& p, const KernelPoint& q, const Hyperparameters& theta) {
  return CompositeKernel(theta)(p, q);
}

DenseMatrix correlation_matrix(std::span<const KernelPoint> points, const CompositeKernel& kernel,
                               bool include_nugget) {
  const std::size_t n = points.size();
  if (n == 0) throw DimensionMismatch("correlation_matrix: no points");
  DenseMatrix m(n, n);
  const double diag = include_nugget ? 1.0 + kernel.theta().lambda2 : 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = diag;
    for (std::size_t j = 0; j < i; ++j) {
      const double v = points[i].event == points[j].event ? kernel.smooth(points[i], points[j]) : 0.0;
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return m;
}

DenseMatrix correlation_matrix(std::span<const KernelPoint> points, const Hyperparameters& theta,
                               bool include_nugget) {
  return correlation_matrix(points, CompositeKernel(theta), include_nugget);
}

Vector cross_correlation_vector(const KernelPoint& target, std::span<const KernelPoint> points,
                                const CompositeKernel& kernel) {
  Vector t(points.size());
  for (std::size_t k = 0; k < points.size(); ++k)
    t[k] = points[k].event == target.event ? kernel.smooth(target, points[k]) : 0.0;
  return t;
}

Vector cross_correlation_vector(const KernelPoint& target, std::span<const KernelPoint> points,
                                const Hyperparameters& theta) {
  return cross_correlation_vector(target, points, CompositeKernel(theta));
}

}  // namespace fieldcal
