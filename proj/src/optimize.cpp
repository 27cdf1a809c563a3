#include "fieldcal/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "fieldcal/error.hpp"

namespace fieldcal {

void OptimizerOptions::validate() const {
  if (max_evals < 1) throw DomainError("optimizer: max_evals must be >= 1");
  if (!(simplex_tolerance > 0.0)) throw DomainError("optimizer: simplex_tolerance must be > 0");
  if (restarts < 1) throw DomainError("optimizer: restarts must be >= 1");
  if (!(initial_step > 0.0)) throw DomainError("optimizer: initial_step must be > 0");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Simplex {
  std::vector<Vector> x;
  Vector f;
};

OptimizerResult run_once(const Objective& objective, const Vector& start, double f_start,
                         const OptimizerOptions& opts) {
  const std::size_t n = start.size();
  const double dn = static_cast<double>(n);
  // Dimension-adaptive coefficients (Gao & Han).
  const double alpha = 1.0;
  const double gamma = 1.0 + 2.0 / dn;
  const double rho = 0.75 - 0.5 / dn;
  const double sigma = n > 1 ? 1.0 - 1.0 / dn : 0.5;

  int evals = 0;
  auto eval = [&](const Vector& x) {
    ++evals;
    const double v = objective(x);
    return std::isfinite(v) ? v : kInf;
  };

  Simplex s;
  s.x.push_back(start);
  s.f.push_back(f_start);
  for (std::size_t i = 0; i < n; ++i) {
    Vector v = start;
    v[i] += opts.initial_step;
    s.f.push_back(eval(v));
    s.x.push_back(std::move(v));
  }

  std::vector<std::size_t> order(n + 1);
  bool converged = false;
  Vector centroid(n), trial(n), trial2(n);
  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.f[a] < s.f[b]; });
    {
      Simplex sorted;
      for (std::size_t i : order) {
        sorted.x.push_back(std::move(s.x[i]));
        sorted.f.push_back(s.f[i]);
      }
      s = std::move(sorted);
    }

    double xspread = 0.0;
    double fspread = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t k = 0; k < n; ++k) xspread = std::max(xspread, std::abs(s.x[i][k] - s.x[0][k]));
      fspread = std::max(fspread, std::abs(s.f[i] - s.f[0]));
    }
    if (xspread <= opts.simplex_tolerance && fspread <= opts.simplex_tolerance) {
      converged = true;
      break;
    }
    if (evals >= opts.max_evals) break;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) centroid[k] += s.x[i][k] / dn;

    const Vector& worst = s.x[n];
    for (std::size_t k = 0; k < n; ++k) trial[k] = centroid[k] + alpha * (centroid[k] - worst[k]);
    const double fr = eval(trial);

    if (fr < s.f[0]) {
      for (std::size_t k = 0; k < n; ++k) trial2[k] = centroid[k] + gamma * (trial[k] - centroid[k]);
      const double fe = eval(trial2);
      if (fe < fr) {
        s.x[n] = trial2;
        s.f[n] = fe;
      } else {
        s.x[n] = trial;
        s.f[n] = fr;
      }
      continue;
    }
    if (fr < s.f[n - 1]) {
      s.x[n] = trial;
      s.f[n] = fr;
      continue;
    }
    // Contraction, outside or inside.
    const bool outside = fr < s.f[n];
    for (std::size_t k = 0; k < n; ++k) {
      trial2[k] = outside ? centroid[k] + rho * (trial[k] - centroid[k])
                          : centroid[k] + rho * (worst[k] - centroid[k]);
    }
    const double fc = eval(trial2);
    if (fc < (outside ? fr : s.f[n])) {
      s.x[n] = trial2;
      s.f[n] = fc;
      continue;
    }
    // Shrink toward the best vertex.
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t k = 0; k < n; ++k) s.x[i][k] = s.x[0][k] + sigma * (s.x[i][k] - s.x[0][k]);
      s.f[i] = eval(s.x[i]);
    }
  }

  return OptimizerResult{s.x[0], s.f[0], evals, converged};
}

double uniform_pm1(std::mt19937_64& rng) {
  return 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0;
}

}  // namespace

OptimizerResult nelder_mead(const Objective& objective, std::span<const double> x0,
                            const OptimizerOptions& opts) {
  opts.validate();
  if (x0.empty()) throw DimensionMismatch("nelder_mead: dimension must be >= 1");
  const Vector start(x0.begin(), x0.end());
  const double f0 = objective(start);
  if (!std::isfinite(f0)) throw NonFiniteObjective("nelder_mead: objective is not finite at x0");

  OptimizerResult best = run_once(objective, start, f0, opts);
  int total_evals = best.evaluations + 1;
  for (int r = 1; r < opts.restarts; ++r) {
    std::mt19937_64 rng(opts.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(r)));
    Vector xr = best.x;
    for (double& v : xr) v += 0.5 * opts.initial_step * uniform_pm1(rng);
    double fr = objective(xr);
    ++total_evals;
    if (!std::isfinite(fr)) {
      xr = best.x;
      fr = best.f;
    }
    OptimizerResult res = run_once(objective, xr, fr, opts);
    total_evals += res.evaluations;
    if (res.f < best.f) best = std::move(res);
  }
  best.evaluations = total_evals;
  return best;
}

}  // namespace fieldcal
