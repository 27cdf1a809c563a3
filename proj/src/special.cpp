#include "fieldcal/special.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "fieldcal/error.hpp"

namespace fieldcal {
namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 20000;

// 1/Gamma(z) = sum_{k=1}^{26} c_k z^k, |z| <= 1/2 (Abramowitz & Stegun 6.1.34).
constexpr std::array<double, 26> kRecipGamma = {
    1.0000000000000000,  0.5772156649015329,  -0.6558780715202538, -0.0420026350340952,
    0.1665386113822915,  -0.0421977345555443, -0.0096219715278770, 0.0072189432466630,
    -0.0011651675918591, -0.0002152416741149, 0.0001280502823882,  -0.0000201348547807,
    -0.0000012504934821, 0.0000011330272320,  -0.0000002056338417, 0.0000000061160950,
    0.0000000050020075,  -0.0000000011812746, 0.0000000001043427,  0.0000000000077823,
    -0.0000000000036968, 0.0000000000005100,  -0.0000000000000206, -0.0000000000000054,
    0.0000000000000014,  0.0000000000000001};

// 1/Gamma(1 + z) = sum_{k>=1} c_k z^{k-1}
double recip_gamma_1p(double z) {
  double s = 0.0;
  for (std::size_t k = kRecipGamma.size(); k-- > 0;) s = s * z + kRecipGamma[k];
  return s;
}

}  // namespace

BesselKPlan::BesselKPlan(double nu) : nu_(nu) {
  if (!(nu > 0.0) || !std::isfinite(nu)) throw DomainError("bessel_k: order must be positive");
  steps_ = static_cast<int>(std::floor(nu + 0.5));
  mu_ = nu - steps_;
  const double mu2 = mu_ * mu_;

  // gam2 = sum over odd k of c_k mu^{k-1}; gam1 = -sum over even k of c_k mu^{k-2}.
  double g1 = 0.0, g2 = 0.0;
  for (std::size_t idx = kRecipGamma.size(); idx-- > 0;) {
    const std::size_t k = idx + 1;
    if (k % 2 == 1) {
      g2 = g2 * mu2 + kRecipGamma[idx];
    } else {
      g1 = g1 * mu2 + kRecipGamma[idx];
    }
  }
  gam1_ = -g1;
  gam2_ = g2;
  gampl_ = recip_gamma_1p(mu_);
  gammi_ = recip_gamma_1p(-mu_);
  const double pimu = std::numbers::pi * mu_;
  fact_ = std::abs(pimu) < 1e-15 ? 1.0 : pimu / std::sin(pimu);
}

double BesselKPlan::log_value(double x) const { return log_value(x, nullptr); }

double BesselKPlan::log_value(double x, double* ratio) const {
  const double mu = mu_;
  const double mu2 = mu * mu;
  double rkmu = 0.0;
  double rk1 = 0.0;
  double log_scale = 0.0;

  if (x < 2.0) {
    // Temme's series for K_mu and K_{mu+1}.
    const double x2 = 0.5 * x;
    double d = -std::log(x2);
    double e = mu * d;
    const double fact2 = std::abs(e) < 1e-15 ? 1.0 : std::sinh(e) / e;
    double ff = fact_ * (gam1_ * std::cosh(e) + gam2_ * fact2 * d);
    double sum = ff;
    e = std::exp(e);
    double p = 0.5 * e / gampl_;
    double q = 0.5 / (e * gammi_);
    double c = 1.0;
    d = x2 * x2;
    double sum1 = p;
    for (int i = 1; i <= kMaxIter; ++i) {
      const double di = i;
      ff = (di * ff + p + q) / (di * di - mu2);
      c *= d / di;
      p /= (di - mu);
      q /= (di + mu);
      const double del = c * ff;
      sum += del;
      sum1 += c * (p - di * ff);
      if (std::abs(del) < std::abs(sum) * kEps) break;
    }
    rkmu = sum;
    rk1 = sum1 * 2.0 / x;
  } else {
    // Steed's continued fraction (CF2) with Temme's normalization.
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d;
    double delh = d;
    double q1 = 0.0;
    double q2 = 1.0;
    const double a1 = 0.25 - mu2;
    double q = a1;
    double c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    for (int i = 2; i <= kMaxIter; ++i) {
      a -= 2.0 * (i - 1);
      c = -a * c / i;
      const double qnew = (q1 - b * q2) / a;
      q1 = q2;
      q2 = qnew;
      q += c * qnew;
      b += 2.0;
      d = 1.0 / (b + a * d);
      delh = (b * d - 1.0) * delh;
      h += delh;
      const double dels = q * delh;
      s += dels;
      if (std::abs(dels / s) < kEps) break;
    }
    h *= a1;
    log_scale = 0.5 * std::log(std::numbers::pi / (2.0 * x)) - x - std::log(s);
    rkmu = 1.0;
    rk1 = (mu + x + 0.5 - h) / x;
  }

  const double xi2 = 2.0 / x;
  for (int i = 1; i <= steps_; ++i) {
    const double next = (mu + i) * xi2 * rk1 + rkmu;
    rkmu = rk1;
    rk1 = next;
    if (rk1 > 1e250) {
      rkmu *= 1e-250;
      rk1 *= 1e-250;
      log_scale += 250.0 * std::numbers::ln10;
    }
  }
  if (ratio) *ratio = rk1 / rkmu;
  return std::log(rkmu) + log_scale;
}

double BesselKPlan::value(double x) const {
  if (x > kBesselUnderflowX) return 0.0;
  return std::exp(log_value(x));
}

BesselValue bessel_k_checked(double nu, double x) {
  if (!(nu > 0.0) || nu > 50.0) throw DomainError("bessel_k: order must lie in (0, 50]");
  if (!(x > 0.0)) throw DomainError("bessel_k: argument must be positive");
  if (x > kBesselUnderflowX) return {0.0, true};
  return {BesselKPlan(nu).value(x), false};
}

double bessel_k(double nu, double x) { return bessel_k_checked(nu, x).value; }

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal quantile: p must lie in (0, 1)");
  // Acklam's rational approximation, then one Halley step.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int it = 0; it < 2; ++it) {
    // Work in the nearer tail to keep the residual relative.
    const double e = x < 0.0 ? std_normal_cdf(x) - p : (1.0 - p) - 0.5 * std::erfc(x / std::numbers::sqrt2);
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double beta_cf(double a, double b, double x) {
  constexpr double fpmin = std::numeric_limits<double>::min() / kEps;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return h;
}

// I_x(a, b) with y = 1 - x supplied separately to avoid cancellation.
double incomplete_beta_xy(double x, double y, double a, double b) {
  if (x <= 0.0) return 0.0;
  if (y <= 0.0) return 1.0;
  const double log_bt =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(y);
  const double bt = std::exp(log_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * beta_cf(a, b, x) / a;
  return 1.0 - bt * beta_cf(b, a, y) / b;
}

}  // namespace

double incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("incomplete beta: shape parameters must be positive");
  if (x < 0.0 || x > 1.0) throw DomainError("incomplete beta: x must lie in [0, 1]");
  return incomplete_beta_xy(x, 1.0 - x, a, b);
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw DomainError("student t: df must be positive");
  if (std::isinf(t)) return t > 0.0 ? 1.0 : 0.0;
  const double t2 = t * t;
  const double denom = df + t2;
  // P(|T| > |t|) / 2
  const double tail = 0.5 * incomplete_beta_xy(df / denom, t2 / denom, 0.5 * df, 0.5);
  return t > 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("t quantile: p must lie in (0, 1)");
  if (!(df > 0.0)) throw DomainError("t quantile: df must be positive");
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -student_t_quantile(1.0 - p, df);
  double lo = 0.0;
  double hi = std::max(1.0, std_normal_quantile(p));
  while (student_t_cdf(hi, df) < p) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) return hi;
  }
  for (int it = 0; it < 400 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, df) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double f_cdf(double x, double d1, double d2) {
  if (!(d1 > 0.0) || !(d2 > 0.0)) throw DomainError("f_cdf: degrees of freedom must be positive");
  if (x < 0.0 || std::isnan(x)) throw DomainError("f_cdf: x must be non-negative");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double denom = d1 * x + d2;
  return incomplete_beta_xy(d1 * x / denom, d2 / denom, 0.5 * d1, 0.5 * d2);
}

double f_sf(double x, double d1, double d2) {
  if (!(d1 > 0.0) || !(d2 > 0.0)) throw DomainError("f_sf: degrees of freedom must be positive");
  if (x < 0.0 || std::isnan(x)) throw DomainError("f_sf: x must be non-negative");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  const double denom = d1 * x + d2;
  return incomplete_beta_xy(d2 / denom, d1 * x / denom, 0.5 * d2, 0.5 * d1);
}

KsResult ks_test(std::span<const double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw DomainError("ks_test: empty sample");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  const double sn = std::sqrt(n);
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  double p = 1.0;
  if (lambda >= 0.2) {
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 200; ++k) {
      const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
      sum += term;
      if (std::abs(term) < 1e-16 * std::abs(sum)) break;
      sign = -sign;
    }
    p = std::clamp(2.0 * sum, 0.0, 1.0);
  }
  return {d, p};
}

}  // namespace fieldcal
