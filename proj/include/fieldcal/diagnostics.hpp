#pragma once
// Model checks: binned semivariograms of the residual dependence, and
// validation of held-out measurements against their predictive distribution
// (standardized errors, pivoted-Cholesky errors, Mahalanobis distance).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fieldcal/dataio.hpp"
#include "fieldcal/inference.hpp"

namespace fieldcal {

enum class BinVariable { h1, h2, delta_intensity };

std::string_view bin_variable_name(BinVariable v);
// Throws DataError for anything other than h1, h2, dx.
BinVariable parse_bin_variable(std::string_view name);

struct VariogramOptions {
  std::size_t bins = 15;
  std::size_t replicates = 200;  // Monte Carlo residual fields for the bounds
  std::uint64_t seed = 0;
};

struct VariogramTable {
  BinVariable variable = BinVariable::h1;
  Vector bin_edges;    // bins + 1
  Vector bin_centers;  // mean of the binning variable over the bin's pairs
  Vector empirical;
  Vector model;
  Vector lower95;
  Vector upper95;
  std::vector<std::size_t> counts;

  std::size_t bins() const { return empirical.size(); }
  double fraction_inside() const;
};

// Equal-count bins over all within-event pairs. Empirical value: mean of
// (e - e')^2 / 2 with e = y - h(x)^T beta_hat. Model value: mean of
// sigma2 (1 + lambda^2 - c(p, p')). Bounds: 2.5% / 97.5% quantiles of the
// empirical value over residual fields simulated from the fitted model.
// Throws EmptyBin when there are fewer pairs than bins.
VariogramTable semivariogram(const ModelFit& fit, std::string_view event, BinVariable variable,
                             const VariogramOptions& opts = {});

// (Y - m) / sd under the measurement-space predictive distribution.
Vector standardized_errors(const ModelFit& fit, std::string_view event, std::span<const DataPair> validation);

struct PivotedErrors {
  Vector values;                            // in pivot order
  std::vector<std::size_t> original_index;  // validation index of each value
};

// e = G^-1 (Y - m) with P^T V P = U^T U and G = P U^T.
PivotedErrors pivoted_errors(const ModelFit& fit, std::string_view event, std::span<const DataPair> validation);

struct MahalanobisResult {
  double statistic = 0.0;  // (Y - m)^T V^-1 (Y - m) / n_val
  double p_value = 1.0;    // upper tail of F(n_val, K - q)
  double raw_sum_sq = 0.0; // sum of squared standardized errors
  double df1 = 0.0;
  double df2 = 0.0;
};

MahalanobisResult mahalanobis_test(const ModelFit& fit, std::string_view event,
                                   std::span<const DataPair> validation);

struct ValidationReport {
  std::string event;
  Vector predictive_mean;
  Vector predictive_sd;
  Vector standardized_errors;
  PivotedErrors pivoted;
  std::vector<std::pair<double, double>> qq_pairs;  // (normal quantile, sorted pivoted error)
  MahalanobisResult mahalanobis;
};

ValidationReport validate_event(const ModelFit& fit, std::string_view event, std::span<const DataPair> validation);

struct HoldoutSplit {
  EventDataset training;
  std::vector<DataPair> validation;
};

// Seeded, order-independent choice of `holdout` pairs to withhold. Throws
// InsufficientStations unless 1 <= holdout <= K - (q + 1).
HoldoutSplit split_holdout(const EventDataset& data, std::size_t holdout, std::size_t q, std::uint64_t seed);

}  // namespace fieldcal
