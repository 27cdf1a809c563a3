#pragma once
// Conjugate normal-inverse-gamma summaries per event and the marginal
// posterior of the shared correlation hyperparameters.
//
// Per event j with K_j pairs, basis matrix H_j and A_j = Sigma_j + lambda^2 I:
//
//   B*_j       = (B^-1 + H^T A^-1 H)^-1
//   beta_hat_j = B*_j (B^-1 b + H^T A^-1 y)
//   S_j        = a + (beta_hat - b)^T B^-1 (beta_hat - b)
//                  + (y - H beta_hat)^T A^-1 (y - H beta_hat)
//   sigma2_j   = S_j / (K_j + d)
//
// and, with a flat prior on theta, the log posterior is (up to a constant)
//
//   sum_j [ -(K_j + d)/2 log sigma2_j - 1/2 log|A_j| + 1/2 log|B*_j| ].

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fieldcal/covariance.hpp"
#include "fieldcal/dataio.hpp"
#include "fieldcal/linalg.hpp"
#include "fieldcal/matrix.hpp"
#include "fieldcal/optimize.hpp"

namespace fieldcal {

struct PriorSpec {
  Vector b{0.0, 1.0, 0.0};
  DenseMatrix B = DenseMatrix::diagonal(std::vector<double>{0.1, 1.0, 1.0});
  double a = 0.0;
  double d = 0.0;
  double sigmaY = 3.0;  // measurement error SD (m/s)
  int basis_degree = 2;

  std::size_t q() const { return static_cast<std::size_t>(basis_degree) + 1; }
  void validate() const;
};

// (1), (1, x) or (1, x, x^2).
Vector basis(double x, std::size_t q);

inline constexpr double kSigmaFloor = 1e-10;

struct EventFit {
  std::string event;
  std::size_t index = 0;  // event id carried by the kernel points
  EventDataset data;
  std::vector<KernelPoint> points;  // rotated with theta.omega

  DenseMatrix H;                 // K x q
  CholeskyFactor A_factor;       // A = L L^T
  DenseMatrix whitened_basis_t;  // q x K, rows are the columns of L^-1 H
  DenseMatrix Bstar;             // q x q
  Vector beta_hat;
  double sigma_hat2 = 0.0;
  bool sigma_floored = false;
  Vector weights;  // A^-1 (y - H beta_hat)
  std::size_t K = 0;
  double df = 0.0;  // K + d
  double scale = 0.0;  // S_j
  double log_marginal = 0.0;

  Vector residuals() const;  // y - H beta_hat
};

// Throws TooFewObservations when K_j <= q and NotPositiveDefinite when A_j
// cannot be factorized.
EventFit event_statistics(const EventDataset& data, const Hyperparameters& theta, const PriorSpec& prior,
                          std::size_t event_index = 0);

// -infinity when some event fails to factorize or hits the variance floor.
double log_posterior_theta(std::span<const EventDataset> data, const Hyperparameters& theta,
                           const PriorSpec& prior);

struct ModelFit {
  Hyperparameters theta;
  std::vector<EventFit> events;
  PriorSpec prior;
  double log_posterior = 0.0;
  int evaluations = 0;
  std::vector<std::string> warnings;

  // Throws UnknownEvent.
  const EventFit& event(std::string_view name) const;
};

// Statistics for every event at a fixed theta.
ModelFit condition(std::span<const EventDataset> data, const Hyperparameters& theta, const PriorSpec& prior);

// Ranges at 20% of the station bounding-box diagonal, nu = 1.5, lambda^2 = 0.1, omega = 0.
Hyperparameters default_theta0(std::span<const EventDataset> data);

// Optimizer box, in natural units.
struct ThetaBounds {
  double nu_min = 0.05, nu_max = 30.0;
  double lambda2_min = 1e-8, lambda2_max = 1e4;
  double range_min = 1e-6, range_max = 1e6;
};

// Unconstrained coordinates: (omega, log lambda^2, log phi1, log phi2, log nu1, log nu2, log phiX).
Vector theta_to_vector(const Hyperparameters& theta);
Hyperparameters vector_to_theta(std::span<const double> v);
bool within_bounds(const Hyperparameters& theta, const ThetaBounds& bounds = {});

// Posterior mode of theta. Throws TooFewObservations before optimizing when
// an event has K_j <= q, and OptimizationFailed when no finite value is found.
ModelFit fit(std::span<const EventDataset> data, const PriorSpec& prior, const OptimizerOptions& opts,
             const Hyperparameters& theta0);

// Versioned text artifact holding theta, the prior, per-event summaries and
// the training pairs, so a fit can be reloaded without optimizing again.
std::string serialize_fit(const ModelFit& fit, std::span<const std::string> header = {});
ModelFit parse_fit(std::istream& in);
ModelFit load_fit(const std::filesystem::path& path);

}  // namespace fieldcal
