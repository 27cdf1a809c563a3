#pragma once

#include <functional>
#include <span>

namespace fieldcal {

// Modified Bessel function of the second kind K_nu(x) for real order.
//
// Evaluates K_mu and K_{mu+1} for the reduced order mu = nu - round(nu) in
// [-1/2, 1/2) with Temme's series (x < 2) or Steed's continued fraction
// (x >= 2), then recurs upward in the order. The order-dependent constants are
// computed once per plan, so a plan is the fast path for kernel matrix fills.
class BesselKPlan {
 public:
  explicit BesselKPlan(double nu);

  double order() const noexcept { return nu_; }

  // log K_nu(x) for x > 0; no overflow for tiny x.
  double log_value(double x) const;
  // Same, also storing K_{nu+1}(x) / K_nu(x) in *ratio.
  double log_value(double x, double* ratio) const;
  // K_nu(x); 0 beyond x = 700.
  double value(double x) const;

 private:
  double nu_;
  double mu_;
  int steps_;  // nu = mu + steps_
  double gam1_, gam2_, gampl_, gammi_;
  double fact_;  // pi mu / sin(pi mu)
};

inline constexpr double kBesselUnderflowX = 700.0;

struct BesselValue {
  double value;
  bool underflow;  // x beyond kBesselUnderflowX, value forced to 0
};

// Throws DomainError unless nu in (0, 50] and x > 0.
BesselValue bessel_k_checked(double nu, double x);
double bessel_k(double nu, double x);

double std_normal_cdf(double x);
double std_normal_quantile(double p);

double student_t_cdf(double t, double df);
double student_t_quantile(double p, double df);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double x, double a, double b);

double f_cdf(double x, double d1, double d2);
// 1 - f_cdf, computed without cancellation.
double f_sf(double x, double d1, double d2);

struct KsResult {
  double statistic;
  double p_value;
};

// One-sample Kolmogorov-Smirnov test of `sample` against a continuous CDF.
KsResult ks_test(std::span<const double> sample, const std::function<double(double)>& cdf);

}  // namespace fieldcal
