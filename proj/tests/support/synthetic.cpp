#include "synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "fieldcal/linalg.hpp"
#include "fieldcal/prediction.hpp"

namespace fieldcal::testing {

GridField storm_field(const std::string& event, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double span = static_cast<double>(n - 1);
  const double c1 = span * (0.3 + 0.4 * unif(rng));
  const double c2 = span * (0.3 + 0.4 * unif(rng));
  const double width = span * (0.35 + 0.15 * unif(rng));
  const double p1 = 2.0 * std::numbers::pi * unif(rng);
  const double p2 = 2.0 * std::numbers::pi * unif(rng);

  GridField g;
  g.event = event;
  g.n1 = g.n2 = n;
  g.values.resize(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double a = (static_cast<double>(i) - c1) / width;
      const double b = (static_cast<double>(j) - c2) / width;
      const double blob = std::exp(-0.5 * (a * a + b * b));
      const double ripple = std::sin(0.31 * static_cast<double>(i) + p1) * std::cos(0.23 * static_cast<double>(j) + p2);
      g.at(i, j) = 10.0 + 18.0 * blob + 3.0 * ripple + 1.5;
    }
  return g;
}

SyntheticEvent make_event(const SyntheticSpec& spec, const std::string& event, std::uint64_t seed) {
  SyntheticEvent out;
  out.grid = storm_field(event, spec.grid_n, seed);
  std::mt19937_64 rng(seed * 7919 + 17);
  std::uniform_real_distribution<double> unif(0.0, static_cast<double>(spec.grid_n - 1));
  std::normal_distribution<double> normal;

  const std::size_t n = spec.stations + spec.holdout;
  std::vector<SpacePoint> locs;
  Vector xs;
  while (locs.size() < n) {
    const SpacePoint p{unif(rng), unif(rng)};
    const double x = interpolate_field(out.grid, p.s1, p.s2);
    if (!(x > spec.threshold)) continue;
    locs.push_back(p);
    xs.push_back(x);
  }

  std::vector<KernelPoint> pts(n);
  for (std::size_t k = 0; k < n; ++k)
    pts[k] = KernelPoint{0, rotate_coords(locs[k], spec.theta.omega), xs[k], static_cast<std::int64_t>(k)};
  PosteriorField prior;
  prior.event = event;
  prior.mean.assign(n, 0.0);
  prior.variance.assign(n, spec.sigma2);
  prior.covariance = spec.sigma2 * correlation_matrix(pts, spec.theta, false);
  const Vector smooth = sample_field(prior, 1, seed ^ 0xA5A5A5A5ULL).front().values;

  out.true_field.resize(n);
  const Vector& beta = spec.beta;
  for (std::size_t k = 0; k < n; ++k) {
    const Vector h = basis(xs[k], beta.size());
    double z = smooth[k];
    for (std::size_t a = 0; a < h.size(); ++a) z += h[a] * beta[a];
    out.true_field[k] = z;
    char id[24];
    std::snprintf(id, sizeof id, "st%04zu", k);
    const double y = std::max(z + spec.sigmaY * normal(rng), 0.0);
    out.stations.push_back(StationRecord{event, id, locs[k].s1, locs[k].s2, y});
    if (k >= spec.stations) out.holdout_ids.emplace_back(id);
  }
  return out;
}

}  // namespace fieldcal::testing
