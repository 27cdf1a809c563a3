#include "fieldcal/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fieldcal/error.hpp"
#include "fieldcal/linalg.hpp"
#include "fieldcal/prediction.hpp"
#include "fieldcal/simd.hpp"
#include "fieldcal/special.hpp"

namespace fieldcal {

std::string_view bin_variable_name(BinVariable v) {
  switch (v) {
    case BinVariable::h1: return "h1";
    case BinVariable::h2: return "h2";
    case BinVariable::delta_intensity: return "dx";
  }
  return "?";
}

BinVariable parse_bin_variable(std::string_view name) {
  if (name == "h1") return BinVariable::h1;
  if (name == "h2") return BinVariable::h2;
  if (name == "dx" || name == "delta_intensity") return BinVariable::delta_intensity;
  throw DataError("unknown binning variable '" + std::string(name) + "' (expected h1, h2 or dx)");
}

double VariogramTable::fraction_inside() const {
  if (empirical.empty()) return 0.0;
  std::size_t inside = 0;
  for (std::size_t b = 0; b < empirical.size(); ++b)
    if (empirical[b] >= lower95[b] && empirical[b] <= upper95[b]) ++inside;
  return static_cast<double>(inside) / static_cast<double>(empirical.size());
}

namespace {

double bin_value(const KernelPoint& p, const KernelPoint& q, BinVariable v) {
  switch (v) {
    case BinVariable::h1: return std::abs(p.location.s1 - q.location.s1);
    case BinVariable::h2: return std::abs(p.location.s2 - q.location.s2);
    case BinVariable::delta_intensity: return std::abs(p.intensity - q.intensity);
  }
  return 0.0;
}

// Quantile with linear interpolation between order statistics.
double quantile_sorted(const Vector& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - w) + sorted[hi] * w;
}

std::uint64_t replicate_seed(std::uint64_t seed, std::size_t r) {
  return seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(r) + 1));
}

}  // namespace

VariogramTable semivariogram(const ModelFit& fit, std::string_view event, BinVariable variable,
                             const VariogramOptions& opts) {
  if (opts.bins < 3) throw DomainError("semivariogram: bins must be >= 3");
  const EventFit& ev = fit.event(event);
  const std::size_t K = ev.K;
  if (K < 2) throw TooFewObservations("semivariogram needs at least 2 observations");
  const std::size_t npairs = K * (K - 1) / 2;
  if (npairs < opts.bins)
    throw EmptyBin("semivariogram: " + std::to_string(npairs) + " pairs cannot fill " + std::to_string(opts.bins) +
                   " bins; reduce bins");

  struct PairRef {
    double value;
    std::uint32_t i, j;
  };
  std::vector<PairRef> pairs;
  pairs.reserve(npairs);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = i + 1; j < K; ++j)
      pairs.push_back({bin_value(ev.points[i], ev.points[j], variable), static_cast<std::uint32_t>(i),
                       static_cast<std::uint32_t>(j)});
  std::stable_sort(pairs.begin(), pairs.end(), [](const PairRef& a, const PairRef& b) { return a.value < b.value; });

  const std::size_t nb = opts.bins;
  std::vector<std::size_t> start(nb + 1);
  for (std::size_t b = 0; b <= nb; ++b) start[b] = b * npairs / nb;

  VariogramTable t;
  t.variable = variable;
  t.bin_edges.resize(nb + 1);
  t.bin_centers.assign(nb, 0.0);
  t.empirical.assign(nb, 0.0);
  t.model.assign(nb, 0.0);
  t.counts.assign(nb, 0);
  t.bin_edges[0] = pairs.front().value;
  for (std::size_t b = 1; b < nb; ++b) t.bin_edges[b] = 0.5 * (pairs[start[b] - 1].value + pairs[start[b]].value);
  t.bin_edges[nb] = pairs.back().value;

  const CompositeKernel kernel(fit.theta);
  const double sigma2 = ev.sigma_hat2;
  const double sill = 1.0 + fit.theta.lambda2;

  auto empirical_bins = [&](const Vector& e, Vector& out) {
    out.assign(nb, 0.0);
    for (std::size_t b = 0; b < nb; ++b) {
      double s = 0.0;
      for (std::size_t k = start[b]; k < start[b + 1]; ++k) {
        const double d = e[pairs[k].i] - e[pairs[k].j];
        s += 0.5 * d * d;
      }
      out[b] = s / static_cast<double>(start[b + 1] - start[b]);
    }
  };

  for (std::size_t b = 0; b < nb; ++b) {
    const std::size_t n = start[b + 1] - start[b];
    if (n == 0) throw EmptyBin("semivariogram: bin " + std::to_string(b) + " is empty; reduce bins");
    t.counts[b] = n;
    double centre = 0.0, model = 0.0;
    for (std::size_t k = start[b]; k < start[b + 1]; ++k) {
      centre += pairs[k].value;
      model += sill - kernel.smooth(ev.points[pairs[k].i], ev.points[pairs[k].j]);
    }
    t.bin_centers[b] = centre / static_cast<double>(n);
    t.model[b] = sigma2 * model / static_cast<double>(n);
  }
  empirical_bins(ev.residuals(), t.empirical);

  // Replicates: y_rep = H beta_hat + sigma L z, with beta re-estimated as for
  // the data so the residuals carry the same estimation effect.
  const std::size_t q = fit.prior.q();
  const Vector B_inv_b = cholesky(fit.prior.B).solve(fit.prior.b);
  const double sigma = std::sqrt(sigma2);
  const DenseMatrix& L = ev.A_factor.lower();
  std::vector<Vector> reps(nb);
  for (auto& v : reps) v.reserve(opts.replicates);
  Vector z(K), w(K), e(K), rhs(q), emp;
  for (std::size_t r = 0; r < opts.replicates; ++r) {
    std::mt19937_64 rng(replicate_seed(opts.seed, r));
    std::normal_distribution<double> normal;
    for (auto& v : z) v = normal(rng);
    // w = L^-1 y_rep = L^-1 H beta_hat + sigma z
    for (std::size_t k = 0; k < K; ++k) {
      double lh = 0.0;
      for (std::size_t a = 0; a < q; ++a) lh += ev.whitened_basis_t(a, k) * ev.beta_hat[a];
      w[k] = lh + sigma * z[k];
    }
    for (std::size_t a = 0; a < q; ++a) rhs[a] = B_inv_b[a] + simd::dot(ev.whitened_basis_t.row(a), w);
    const Vector beta = ev.Bstar * rhs;
    // y_rep = L w
    for (std::size_t k = 0; k < K; ++k) {
      const double yk = simd::dot(L.row(k).first(k + 1), std::span<const double>(w).first(k + 1));
      e[k] = yk - simd::dot(ev.H.row(k), beta);
    }
    empirical_bins(e, emp);
    for (std::size_t b = 0; b < nb; ++b) reps[b].push_back(emp[b]);
  }

  t.lower95.resize(nb);
  t.upper95.resize(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    if (reps[b].empty()) {
      t.lower95[b] = t.upper95[b] = t.model[b];
      continue;
    }
    std::sort(reps[b].begin(), reps[b].end());
    t.lower95[b] = std::min(quantile_sorted(reps[b], 0.025), t.model[b]);
    t.upper95[b] = std::max(quantile_sorted(reps[b], 0.975), t.model[b]);
  }
  return t;
}

namespace {

struct Predictive {
  PosteriorField field;
  Vector residual;  // Y - m
};

Predictive predictive(const ModelFit& fit, std::string_view event, std::span<const DataPair> validation) {
  if (validation.empty()) throw InsufficientStations("validation needs at least one held-out pair");
  std::vector<TargetSite> sites;
  sites.reserve(validation.size());
  for (const auto& p : validation) sites.push_back(TargetSite{p.location, p.x});
  Predictive out;
  out.field = predictive_measurements(fit, event, sites, true);
  out.residual.resize(validation.size());
  for (std::size_t i = 0; i < validation.size(); ++i) out.residual[i] = validation[i].y - out.field.mean[i];
  return out;
}

Vector standardize(const Predictive& p) {
  Vector e(p.residual.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = p.residual[i] / std::sqrt(p.field.variance[i]);
  return e;
}

PivotedErrors pivot(const Predictive& p) {
  DenseMatrix v = p.field.covariance;
  v.symmetrize();
  const PivotedCholeskyFactor pc = pivoted_cholesky(v);
  // U^T e = P^T r, solved over the leading rank rows.
  PivotedErrors out;
  out.values.resize(pc.rank);
  out.original_index.resize(pc.rank);
  for (std::size_t k = 0; k < pc.rank; ++k) {
    double s = p.residual[pc.permutation[k]];
    for (std::size_t j = 0; j < k; ++j) s -= pc.upper(j, k) * out.values[j];
    out.values[k] = s / pc.upper(k, k);
    out.original_index[k] = pc.permutation[k];
  }
  return out;
}

MahalanobisResult mahalanobis(const ModelFit& fit, std::string_view event, const Predictive& p) {
  const EventFit& ev = fit.event(event);
  const double n = static_cast<double>(p.residual.size());
  MahalanobisResult m;
  m.df1 = n;
  m.df2 = static_cast<double>(ev.K) - static_cast<double>(fit.prior.q());
  if (!(m.df2 > 0.0)) throw TooFewObservations("Mahalanobis test needs K - q > 0");
  DenseMatrix v = p.field.covariance;
  v.symmetrize();
  const CholeskyFactor f = cholesky(v);
  Vector w = p.residual;
  f.solve_lower_in_place(w);
  m.statistic = simd::dot(w, w) / n;
  m.p_value = std::clamp(f_sf(m.statistic, m.df1, m.df2), 0.0, 1.0);
  const Vector e = standardize(p);
  m.raw_sum_sq = simd::dot(e, e);
  return m;
}

}  // namespace

Vector standardized_errors(const ModelFit& fit, std::string_view event, std::span<const DataPair> validation) {
  return standardize(predictive(fit, event, validation));
}

PivotedErrors pivoted_errors(const ModelFit& fit, std::string_view event, std::span<const DataPair> validation) {
  return pivot(predictive(fit, event, validation));
}

MahalanobisResult mahalanobis_test(const ModelFit& fit, std::string_view event,
                                   std::span<const DataPair> validation) {
  return mahalanobis(fit, event, predictive(fit, event, validation));
}

ValidationReport validate_event(const ModelFit& fit, std::string_view event, std::span<const DataPair> validation) {
  const Predictive p = predictive(fit, event, validation);
  ValidationReport r;
  r.event = std::string(event);
  r.predictive_mean = p.field.mean;
  r.predictive_sd = p.field.sd();
  r.standardized_errors = standardize(p);
  r.pivoted = pivot(p);
  r.mahalanobis = mahalanobis(fit, event, p);
  Vector sorted = r.pivoted.values;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  r.qq_pairs.reserve(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    r.qq_pairs.emplace_back(std_normal_quantile((static_cast<double>(i) + 0.5) / n), sorted[i]);
  return r;
}

HoldoutSplit split_holdout(const EventDataset& data, std::size_t holdout, std::size_t q, std::uint64_t seed) {
  const std::size_t K = data.pairs.size();
  if (holdout == 0 || K < q + 1 || holdout > K - (q + 1))
    throw InsufficientStations("event " + data.event + ": cannot hold out " + std::to_string(holdout) + " of " +
                               std::to_string(K) + " pairs (at most K - q - 1 = " +
                               std::to_string(K > q + 1 ? K - q - 1 : 0) + ")");
  std::vector<DataPair> sorted = data.pairs;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const DataPair& a, const DataPair& b) { return a.station < b.station; });
  std::vector<std::size_t> idx(K);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = K - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<bool> held(K, false);
  for (std::size_t i = 0; i < holdout; ++i) held[idx[i]] = true;

  HoldoutSplit s;
  s.training.event = data.event;
  s.training.threshold = data.threshold;
  for (std::size_t k = 0; k < K; ++k) (held[k] ? s.validation : s.training.pairs).push_back(sorted[k]);
  return s;
}

}  // namespace fieldcal
