#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "fieldcal/matrix.hpp"

namespace fieldcal {

struct OptimizerOptions {
  int max_evals = 3000;            // per restart
  double simplex_tolerance = 1e-6;
  int restarts = 1;                // total number of starts, >= 1
  std::uint64_t seed = 0;
  double initial_step = 0.5;       // edge length of the starting simplex

  void validate() const;
};

struct OptimizerResult {
  Vector x;
  double f = 0.0;
  int evaluations = 0;
  bool converged = false;  // spread criterion met (in the winning restart)
};

using Objective = std::function<double(std::span<const double>)>;

// Minimizes `objective` with Nelder-Mead.
//
// Non-finite values away from x0 are treated as +inf, which lets callers encode
// box constraints. Converged when both the vertex spread (max-norm distance to
// the best vertex) and the function-value spread are below simplex_tolerance.
// Restart r > 0 starts from the best point so far, jittered with a stream
// derived from (seed, r). Ties between restarts go to the lowest index.
OptimizerResult nelder_mead(const Objective& objective, std::span<const double> x0,
                            const OptimizerOptions& opts);

}  // namespace fieldcal
