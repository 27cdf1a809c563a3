#include "fieldcal/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "fieldcal/error.hpp"
#include "fieldcal/linalg.hpp"
#include "fieldcal/simd.hpp"
#include "fieldcal/special.hpp"

namespace fieldcal {

Vector PosteriorField::sd() const {
  Vector s(variance.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sqrt(std::max(variance[i], 0.0));
  return s;
}

double interval_multiplier(double df, double level, IntervalLaw law) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("interval level must lie in (0, 1)");
  const double p = 0.5 + 0.5 * level;
  const bool use_t = law == IntervalLaw::student_t || (law == IntervalLaw::automatic && df <= 30.0);
  if (use_t) {
    if (!(df > 0.0)) throw DomainError("Student-t interval needs positive degrees of freedom");
    return student_t_quantile(p, df);
  }
  return std_normal_quantile(p);
}

std::pair<double, double> interval(const PosteriorField& field, std::size_t i, double level, IntervalLaw law) {
  const double half = interval_multiplier(field.df, level, law) * std::sqrt(std::max(field.variance.at(i), 0.0));
  return {field.mean[i] - half, field.mean[i] + half};
}

namespace {

PosteriorField condition_targets(const ModelFit& fit, const EventFit& ev, std::span<const TargetSite> targets,
                                 bool full_cov, FieldSpace space) {
  const std::size_t m = targets.size();
  const std::size_t K = ev.K;
  const std::size_t q = fit.prior.q();
  const CompositeKernel kernel(fit.theta);
  const double sigma2 = ev.sigma_hat2;
  const double sy2 = fit.prior.sigmaY * fit.prior.sigmaY;
  const double nugget_z = std::max(fit.theta.lambda2 - sy2 / sigma2, 0.0);

  PosteriorField out;
  out.event = ev.event;
  out.df = static_cast<double>(K) - static_cast<double>(q);
  out.space = space;
  out.targets.resize(m);
  out.mean.resize(m);
  out.variance.resize(m);
  out.extrapolated.assign(m, false);

  // Whitened cross-correlations v_i = L^-1 t_i and basis residuals r_i.
  DenseMatrix v(full_cov ? m : 0, K);
  DenseMatrix r(full_cov ? m : 0, q);
  Vector vi(K), ri(q);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& t = targets[i];
    if (!std::isfinite(t.x) || !std::isfinite(t.location.s1) || !std::isfinite(t.location.s2))
      throw DomainError("prediction target is not finite");
    KernelPoint kp{ev.index, rotate_coords(t.location, fit.theta.omega), t.x, kNoRecord};
    out.targets[i] = kp;

    const Vector cross = cross_correlation_vector(kp, ev.points, kernel);
    const Vector h = basis(t.x, q);
    out.mean[i] = simd::dot(h, ev.beta_hat) + simd::dot(cross, ev.weights);

    vi = cross;
    ev.A_factor.solve_lower_in_place(vi);
    for (std::size_t a = 0; a < q; ++a) ri[a] = h[a] - simd::dot(ev.whitened_basis_t.row(a), vi);
    const Vector Br = ev.Bstar * ri;
    double var = 1.0 + nugget_z - simd::dot(vi, vi) + simd::dot(ri, Br);
    var = sigma2 * std::max(var, 0.0);
    if (space == FieldSpace::measurement) var += sy2;
    out.variance[i] = var;

    if (full_cov) {
      std::copy(vi.begin(), vi.end(), v.row(i).begin());
      std::copy(ri.begin(), ri.end(), r.row(i).begin());
    }
  }

  if (full_cov) {
    out.covariance = DenseMatrix(m, m);
    for (std::size_t i = 0; i < m; ++i) {
      out.covariance(i, i) = out.variance[i];
      const Vector Bri = ev.Bstar * r.row(i);
      for (std::size_t j = 0; j < i; ++j) {
        const double c = kernel.smooth(out.targets[i], out.targets[j]) - simd::dot(v.row(i), v.row(j)) +
                         simd::dot(r.row(j), Bri);
        out.covariance(i, j) = sigma2 * c;
        out.covariance(j, i) = sigma2 * c;
      }
    }
  }
  return out;
}

}  // namespace

PosteriorField posterior_field(const ModelFit& fit, std::string_view event, std::span<const TargetSite> targets,
                               bool full_cov) {
  return condition_targets(fit, fit.event(event), targets, full_cov, FieldSpace::actual_field);
}

PosteriorField predictive_measurements(const ModelFit& fit, std::string_view event,
                                       std::span<const TargetSite> targets, bool full_cov) {
  return condition_targets(fit, fit.event(event), targets, full_cov, FieldSpace::measurement);
}

std::vector<FieldRealization> sample_field(const PosteriorField& posterior, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DomainError("sample_field: n must be >= 1");
  if (!posterior.has_covariance()) throw DomainError("sample_field needs a full covariance");
  const std::size_t m = posterior.size();
  DenseMatrix cov = posterior.covariance;
  cov.symmetrize();
  // A zero covariance has rank 0; every draw then equals the mean.
  const PivotedCholeskyFactor pc = pivoted_cholesky(cov);
  const DenseMatrix g = pc.g();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<FieldRealization> out;
  out.reserve(n);
  Vector z(pc.rank);
  for (std::size_t s = 0; s < n; ++s) {
    for (auto& v : z) v = normal(rng);
    FieldRealization r{posterior.event, posterior.mean, seed};
    for (std::size_t i = 0; i < m; ++i) r.values[i] += simd::dot(g.row(i).first(pc.rank), z);
    out.push_back(std::move(r));
  }
  return out;
}

PosteriorField predict_grid(const ModelFit& fit, std::string_view event, const GridField& grid, bool full_cov) {
  grid.validate();
  const EventFit& ev = fit.event(event);
  std::vector<TargetSite> sites;
  std::vector<std::size_t> cell;
  for (std::size_t i = 0; i < grid.n1; ++i)
    for (std::size_t j = 0; j < grid.n2; ++j) {
      if (grid.missing(i, j)) continue;
      sites.push_back(TargetSite{grid.cell_center(i, j), grid.at(i, j)});
      cell.push_back(i * grid.n2 + j);
    }
  const PosteriorField part = condition_targets(fit, ev, sites, full_cov, FieldSpace::actual_field);
  if (sites.size() == grid.values.size()) {
    PosteriorField out = part;
    for (std::size_t c = 0; c < out.size(); ++c) out.extrapolated[c] = !(sites[c].x > ev.data.threshold);
    return out;
  }

  const std::size_t total = grid.values.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  PosteriorField out;
  out.event = part.event;
  out.df = part.df;
  out.space = part.space;
  out.targets.resize(total);
  out.mean.assign(total, nan);
  out.variance.assign(total, nan);
  out.extrapolated.assign(total, false);
  if (full_cov) out.covariance = DenseMatrix(total, total, nan);
  for (std::size_t c = 0; c < sites.size(); ++c) {
    const std::size_t k = cell[c];
    out.targets[k] = part.targets[c];
    out.mean[k] = part.mean[c];
    out.variance[k] = part.variance[c];
    out.extrapolated[k] = !(sites[c].x > ev.data.threshold);
    if (full_cov)
      for (std::size_t c2 = 0; c2 < sites.size(); ++c2) out.covariance(k, cell[c2]) = part.covariance(c, c2);
  }
  for (std::size_t i = 0; i < grid.n1; ++i)
    for (std::size_t j = 0; j < grid.n2; ++j)
      if (grid.missing(i, j)) {
        const SpacePoint p = rotate_coords(grid.cell_center(i, j), fit.theta.omega);
        out.targets[i * grid.n2 + j] = KernelPoint{ev.index, p, nan, kNoRecord};
      }
  return out;
}

GridField grid_like(const GridField& like, std::span<const double> values) {
  if (values.size() != like.n1 * like.n2) throw DimensionMismatch("grid_like: value count");
  GridField g = like;
  g.values.assign(values.begin(), values.end());
  return g;
}

}  // namespace fieldcal
