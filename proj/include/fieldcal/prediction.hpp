#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fieldcal/covariance.hpp"
#include "fieldcal/dataio.hpp"
#include "fieldcal/inference.hpp"
#include "fieldcal/matrix.hpp"

namespace fieldcal {

// A prediction location in grid coordinates (before the model rotation)
// with the simulated intensity there.
struct TargetSite {
  SpacePoint location;
  double x = 0.0;
};

enum class FieldSpace { actual_field, measurement };

struct PosteriorField {
  std::string event;
  std::vector<KernelPoint> targets;  // rotated
  Vector mean;
  Vector variance;
  DenseMatrix covariance;  // empty unless a full covariance was requested
  double df = 0.0;         // K - q
  FieldSpace space = FieldSpace::actual_field;
  std::vector<bool> extrapolated;  // grid cells at or below the fitting threshold

  std::size_t size() const { return mean.size(); }
  bool has_covariance() const { return !covariance.empty(); }
  Vector sd() const;
};

enum class IntervalLaw { gaussian, student_t, automatic };

// automatic: Gaussian when df > 30, Student-t otherwise.
double interval_multiplier(double df, double level, IntervalLaw law);
std::pair<double, double> interval(const PosteriorField& field, std::size_t i, double level = 0.95,
                                   IntervalLaw law = IntervalLaw::automatic);

// Distribution of the actual field Z at the targets for one event.
//
//   mean = h(x)^T beta_hat + t^T A^-1 (y - H beta_hat)
//   cov  = sigma2 [ C + N - T^T A^-1 T + R B* R^T ],  R = H_t - T^T A^-1 H
//
// where C is the smooth correlation between targets and N adds the micro-scale
// nugget max(lambda^2 - sigmaY^2 / sigma2, 0) on the diagonal only.
PosteriorField posterior_field(const ModelFit& fit, std::string_view event, std::span<const TargetSite> targets,
                               bool full_cov);

// Predictive distribution of new measurements: same mean, sigmaY^2 added to
// the diagonal.
PosteriorField predictive_measurements(const ModelFit& fit, std::string_view event,
                                       std::span<const TargetSite> targets, bool full_cov = true);

struct FieldRealization {
  std::string event;
  Vector values;
  std::uint64_t seed = 0;
};

// mean + G z with G G^T = covariance from a pivoted Cholesky factorization,
// so singular (including zero) covariances are fine. Deterministic in seed.
std::vector<FieldRealization> sample_field(const PosteriorField& posterior, std::size_t n, std::uint64_t seed);

// Posterior at every grid cell center (intensity = cell value), row-major.
// Missing cells get NaN mean and variance.
PosteriorField predict_grid(const ModelFit& fit, std::string_view event, const GridField& grid,
                            bool full_cov = false);

// Copy of `like` holding `values` instead.
GridField grid_like(const GridField& like, std::span<const double> values);

}  // namespace fieldcal
