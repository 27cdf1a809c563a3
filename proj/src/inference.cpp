#include "fieldcal/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "fieldcal/error.hpp"
#include "fieldcal/log.hpp"
#include "fieldcal/simd.hpp"

namespace fieldcal {

void PriorSpec::validate() const {
  if (basis_degree < 0 || basis_degree > 2) throw DomainError("basis_degree must be 0, 1 or 2");
  const std::size_t n = q();
  if (b.size() != n) throw DimensionMismatch("prior b must have length q");
  if (B.rows() != n || B.cols() != n) throw DimensionMismatch("prior B must be q x q");
  if (!(a >= 0.0) || !(d >= 0.0)) throw DomainError("prior a and d must be >= 0");
  if (!(sigmaY > 0.0)) throw DomainError("sigmaY must be > 0");
  try {
    (void)cholesky(B);
  } catch (const Error&) {
    throw DomainError("prior B must be symmetric positive definite");
  }
}

Vector basis(double x, std::size_t q) {
  switch (q) {
    case 1: return {1.0};
    case 2: return {1.0, x};
    case 3: return {1.0, x, x * x};
    default: throw DomainError("basis: q must be 1, 2 or 3");
  }
}

Vector EventFit::residuals() const {
  Vector r(K);
  for (std::size_t k = 0; k < K; ++k) r[k] = data.pairs[k].y - simd::dot(H.row(k), beta_hat);
  return r;
}

namespace {

// B^-1 and its factor are shared by all events.
struct PriorAlgebra {
  DenseMatrix B_inv;
  Vector B_inv_b;
};

PriorAlgebra prior_algebra(const PriorSpec& prior) {
  PriorAlgebra pa;
  pa.B_inv = cholesky(prior.B).inverse();
  pa.B_inv_b = pa.B_inv * prior.b;
  return pa;
}

EventFit compute_event(const EventDataset& data, const CompositeKernel& kernel, const PriorSpec& prior,
                       const PriorAlgebra& pa, std::size_t event_index) {
  const std::size_t q = prior.q();
  const std::size_t K = data.pairs.size();
  if (K <= q)
    throw TooFewObservations("event " + data.event + " has " + std::to_string(K) + " pairs; need more than " +
                             std::to_string(q));
  const Hyperparameters& theta = kernel.theta();

  EventFit f;
  f.event = data.event;
  f.index = event_index;
  f.data = data;
  f.K = K;
  f.df = static_cast<double>(K) + prior.d;
  f.points.resize(K);
  f.H = DenseMatrix(K, q);
  Vector y(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& p = data.pairs[k];
    f.points[k] = KernelPoint{event_index, rotate_coords(p.location, theta.omega), p.x, static_cast<std::int64_t>(k)};
    const Vector h = basis(p.x, q);
    std::copy(h.begin(), h.end(), f.H.row(k).begin());
    y[k] = p.y;
  }

  f.A_factor = cholesky(correlation_matrix(f.points, kernel, true));

  // Whitened quantities: L^-1 H (stored transposed) and L^-1 y.
  f.whitened_basis_t = DenseMatrix(q, K);
  Vector col(K);
  for (std::size_t j = 0; j < q; ++j) {
    for (std::size_t k = 0; k < K; ++k) col[k] = f.H(k, j);
    f.A_factor.solve_lower_in_place(col);
    std::copy(col.begin(), col.end(), f.whitened_basis_t.row(j).begin());
  }
  Vector wy = y;
  f.A_factor.solve_lower_in_place(wy);

  DenseMatrix precision = pa.B_inv;  // B^-1 + H^T A^-1 H
  Vector rhs = pa.B_inv_b;           // B^-1 b + H^T A^-1 y
  for (std::size_t i = 0; i < q; ++i) {
    const auto wi = f.whitened_basis_t.row(i);
    rhs[i] += simd::dot(wi, wy);
    for (std::size_t j = 0; j < q; ++j) precision(i, j) += simd::dot(wi, f.whitened_basis_t.row(j));
  }
  precision.symmetrize();
  const CholeskyFactor pf = cholesky(precision);
  f.Bstar = pf.inverse();
  f.beta_hat = pf.solve(rhs);

  // S = a + (beta - b)^T B^-1 (beta - b) + r^T A^-1 r, r = y - H beta.
  Vector db(q);
  for (std::size_t i = 0; i < q; ++i) db[i] = f.beta_hat[i] - prior.b[i];
  const Vector B_inv_db = pa.B_inv * db;
  Vector r(K);
  for (std::size_t k = 0; k < K; ++k) r[k] = y[k] - simd::dot(f.H.row(k), f.beta_hat);
  Vector wr = r;
  f.A_factor.solve_lower_in_place(wr);
  f.scale = prior.a + simd::dot(db, B_inv_db) + simd::dot(wr, wr);
  f.weights = wr;
  f.A_factor.solve_upper_in_place(f.weights);

  const double s2 = f.scale / f.df;
  f.sigma_floored = !(s2 > kSigmaFloor);
  f.sigma_hat2 = f.sigma_floored ? kSigmaFloor : s2;
  f.log_marginal = f.sigma_floored ? -std::numeric_limits<double>::infinity()
                                   : -0.5 * f.df * std::log(f.sigma_hat2) - 0.5 * f.A_factor.logdet() -
                                         0.5 * pf.logdet();
  return f;
}

}  // namespace

EventFit event_statistics(const EventDataset& data, const Hyperparameters& theta, const PriorSpec& prior,
                          std::size_t event_index) {
  prior.validate();
  return compute_event(data, CompositeKernel(theta), prior, prior_algebra(prior), event_index);
}

double log_posterior_theta(std::span<const EventDataset> data, const Hyperparameters& theta,
                           const PriorSpec& prior) {
  prior.validate();
  const CompositeKernel kernel(theta);
  const PriorAlgebra pa = prior_algebra(prior);
  double total = 0.0;
  for (std::size_t j = 0; j < data.size(); ++j) {
    try {
      total += compute_event(data[j], kernel, prior, pa, j).log_marginal;
    } catch (const NotPositiveDefinite&) {
      return -std::numeric_limits<double>::infinity();
    }
  }
  return total;
}

const EventFit& ModelFit::event(std::string_view name) const {
  for (const auto& e : events)
    if (e.event == name) return e;
  throw UnknownEvent("unknown event '" + std::string(name) + "'");
}

namespace {

void check_nugget_split(ModelFit& m) {
  for (const auto& e : m.events) {
    if (m.prior.sigmaY * m.prior.sigmaY > m.theta.lambda2 * e.sigma_hat2 * (1.0 + 1e-12)) {
      m.warnings.push_back("event " + e.event + ": sigmaY^2 exceeds lambda^2 * sigma_hat^2 (" +
                           format6(m.prior.sigmaY * m.prior.sigmaY) + " > " +
                           format6(m.theta.lambda2 * e.sigma_hat2) + ")");
    }
  }
}

}  // namespace

ModelFit condition(std::span<const EventDataset> data, const Hyperparameters& theta, const PriorSpec& prior) {
  prior.validate();
  if (data.empty()) throw EmptyDataset("no events to condition on");
  ModelFit m;
  m.theta = theta;
  m.prior = prior;
  const CompositeKernel kernel(theta);
  const PriorAlgebra pa = prior_algebra(prior);
  for (std::size_t j = 0; j < data.size(); ++j) {
    m.events.push_back(compute_event(data[j], kernel, prior, pa, j));
    m.log_posterior += m.events.back().log_marginal;
  }
  check_nugget_split(m);
  return m;
}

Hyperparameters default_theta0(std::span<const EventDataset> data) {
  double lo1 = std::numeric_limits<double>::infinity(), hi1 = -lo1, lo2 = lo1, hi2 = -lo1;
  for (const auto& ev : data)
    for (const auto& p : ev.pairs) {
      lo1 = std::min(lo1, p.location.s1);
      hi1 = std::max(hi1, p.location.s1);
      lo2 = std::min(lo2, p.location.s2);
      hi2 = std::max(hi2, p.location.s2);
    }
  double diag = std::hypot(hi1 - lo1, hi2 - lo2);
  if (!(diag > 0.0) || !std::isfinite(diag)) diag = 1.0;

  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
  for (const auto& ev : data)
    for (const auto& p : ev.pairs) {
      xlo = std::min(xlo, p.x);
      xhi = std::max(xhi, p.x);
    }
  double xspan = xhi - xlo;
  if (!(xspan > 0.0) || !std::isfinite(xspan)) xspan = 1.0;

  Hyperparameters t;
  t.omega = 0.0;
  t.lambda2 = 0.1;
  t.phi1 = t.phi2 = 0.2 * diag;
  t.nu1 = t.nu2 = 1.5;
  // The intensity range has no spatial analogue; use 20% of the simulated span.
  t.phiX = 0.2 * xspan;
  return t;
}

Vector theta_to_vector(const Hyperparameters& t) {
  return {t.omega, std::log(t.lambda2), std::log(t.phi1), std::log(t.phi2),
          std::log(t.nu1), std::log(t.nu2), std::log(t.phiX)};
}

Hyperparameters vector_to_theta(std::span<const double> v) {
  if (v.size() != 7) throw DimensionMismatch("theta vector must have 7 entries");
  Hyperparameters t;
  t.omega = wrap_omega(v[0]);
  t.lambda2 = std::exp(v[1]);
  t.phi1 = std::exp(v[2]);
  t.phi2 = std::exp(v[3]);
  t.nu1 = std::exp(v[4]);
  t.nu2 = std::exp(v[5]);
  t.phiX = std::exp(v[6]);
  return t;
}

bool within_bounds(const Hyperparameters& t, const ThetaBounds& b) {
  auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  return in(t.lambda2, b.lambda2_min, b.lambda2_max) && in(t.phi1, b.range_min, b.range_max) &&
         in(t.phi2, b.range_min, b.range_max) && in(t.phiX, b.range_min, b.range_max) &&
         in(t.nu1, b.nu_min, b.nu_max) && in(t.nu2, b.nu_min, b.nu_max);
}

ModelFit fit(std::span<const EventDataset> data, const PriorSpec& prior, const OptimizerOptions& opts,
             const Hyperparameters& theta0) {
  prior.validate();
  opts.validate();
  theta0.validate();
  if (data.empty()) throw EmptyDataset("no events to fit");
  for (const auto& ev : data) {
    if (ev.pairs.size() <= prior.q())
      throw TooFewObservations("event " + ev.event + " has " + std::to_string(ev.pairs.size()) +
                               " pairs; need more than " + std::to_string(prior.q()));
  }
  if (!within_bounds(theta0)) throw DomainError("theta0 lies outside the optimizer bounds");

  const PriorAlgebra pa = prior_algebra(prior);
  const double inf = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  auto objective = [&](std::span<const double> v) -> double {
    ++evaluations;
    const Hyperparameters t = vector_to_theta(v);
    if (!within_bounds(t)) return inf;
    try {
      const CompositeKernel kernel(t, MaternEvaluation::tabulated);
      double total = 0.0;
      for (std::size_t j = 0; j < data.size(); ++j) {
        const double lm = compute_event(data[j], kernel, prior, pa, j).log_marginal;
        if (!std::isfinite(lm)) return inf;
        total += lm;
      }
      return -total;
    } catch (const NotPositiveDefinite&) {
      return inf;
    } catch (const DomainError&) {
      return inf;
    }
  };

  const Vector x0 = theta_to_vector(theta0);
  OptimizerResult res;
  try {
    res = nelder_mead(objective, x0, opts);
  } catch (const NonFiniteObjective&) {
    throw OptimizationFailed("log posterior is not finite at the starting hyperparameters");
  }
  if (!std::isfinite(res.f)) throw OptimizationFailed("no finite log posterior found");

  ModelFit m = condition(data, vector_to_theta(res.x), prior);
  m.evaluations = evaluations;
  if (!res.converged) m.warnings.push_back("optimizer stopped at max_evals before the simplex converged");
  log::debug("fit: " + std::to_string(evaluations) + " evaluations, log posterior " + format6(m.log_posterior));
  return m;
}

// ---------------------------------------------------------------------------
// Artifact format

namespace {

std::string full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string serialize_fit(const ModelFit& m, std::span<const std::string> header) {
  std::ostringstream out;
  for (const auto& h : header) out << "# " << h << '\n';
  out << "FIELDCAL_FIT v1\n";
  const auto& t = m.theta;
  out << "theta " << full(t.omega) << ' ' << full(t.lambda2) << ' ' << full(t.phi1) << ' ' << full(t.phi2) << ' '
      << full(t.nu1) << ' ' << full(t.nu2) << ' ' << full(t.phiX) << '\n';
  const std::size_t q = m.prior.q();
  out << "prior.basis_degree " << m.prior.basis_degree << '\n';
  out << "prior.b";
  for (double v : m.prior.b) out << ' ' << full(v);
  out << "\nprior.B";
  for (double v : m.prior.B.data()) out << ' ' << full(v);
  out << "\nprior.a " << full(m.prior.a) << '\n';
  out << "prior.d " << full(m.prior.d) << '\n';
  out << "prior.sigma_y " << full(m.prior.sigmaY) << '\n';
  out << "log_posterior " << full(m.log_posterior) << '\n';
  out << "events " << m.events.size() << '\n';
  for (const auto& e : m.events) {
    out << "event " << std::quoted(e.event) << " K " << e.K << " threshold " << full(e.data.threshold) << '\n';
    out << "beta_hat";
    for (std::size_t i = 0; i < q; ++i) out << ' ' << full(e.beta_hat[i]);
    out << "\nsigma_hat2 " << full(e.sigma_hat2) << '\n';
    out << "pairs station s1 s2 x y\n";
    for (const auto& p : e.data.pairs)
      out << std::quoted(p.station) << ' ' << full(p.location.s1) << ' ' << full(p.location.s2) << ' '
          << full(p.x) << ' ' << full(p.y) << '\n';
    out << "end\n";
  }
  return out.str();
}

ModelFit parse_fit(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> std::istringstream {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line.front() == '#') continue;
      return std::istringstream(line);
    }
    throw ParseError(lineno, "unexpected end of fit artifact");
  };
  auto expect_key = [&](std::istringstream& ls, const std::string& key) {
    std::string k;
    ls >> k;
    if (k != key) throw ParseError(lineno, "expected '" + key + "', found '" + k + "'");
  };
  auto read_doubles = [&](std::istringstream& ls, std::size_t n) {
    Vector v(n);
    for (auto& x : v)
      if (!(ls >> x)) throw ParseError(lineno, "expected " + std::to_string(n) + " numbers");
    return v;
  };

  {
    auto ls = next();
    if (line != "FIELDCAL_FIT v1") throw ParseError(lineno, "not a fieldcal fit artifact (v1)");
  }
  Hyperparameters theta;
  {
    auto ls = next();
    expect_key(ls, "theta");
    const Vector v = read_doubles(ls, 7);
    theta = Hyperparameters{v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
  }
  PriorSpec prior;
  {
    auto ls = next();
    expect_key(ls, "prior.basis_degree");
    if (!(ls >> prior.basis_degree)) throw ParseError(lineno, "bad basis degree");
  }
  const std::size_t q = prior.q();
  {
    auto ls = next();
    expect_key(ls, "prior.b");
    prior.b = read_doubles(ls, q);
  }
  {
    auto ls = next();
    expect_key(ls, "prior.B");
    const Vector v = read_doubles(ls, q * q);
    prior.B = DenseMatrix(q, q);
    std::copy(v.begin(), v.end(), prior.B.data().begin());
  }
  for (auto [key, dst] : {std::pair{"prior.a", &prior.a}, {"prior.d", &prior.d}, {"prior.sigma_y", &prior.sigmaY}}) {
    auto ls = next();
    expect_key(ls, key);
    *dst = read_doubles(ls, 1)[0];
  }
  double stored_lp = 0.0;
  {
    auto ls = next();
    expect_key(ls, "log_posterior");
    stored_lp = read_doubles(ls, 1)[0];
  }
  std::size_t nevents = 0;
  {
    auto ls = next();
    expect_key(ls, "events");
    if (!(ls >> nevents) || nevents == 0) throw ParseError(lineno, "bad event count");
  }
  std::vector<EventDataset> data(nevents);
  for (auto& ev : data) {
    std::size_t K = 0;
    {
      auto ls = next();
      expect_key(ls, "event");
      std::string kw;
      if (!(ls >> std::quoted(ev.event) >> kw >> K) || kw != "K") throw ParseError(lineno, "bad event line");
      expect_key(ls, "threshold");
      ev.threshold = read_doubles(ls, 1)[0];
    }
    {
      auto ls = next();
      expect_key(ls, "beta_hat");
    }
    {
      auto ls = next();
      expect_key(ls, "sigma_hat2");
    }
    {
      auto ls = next();
      expect_key(ls, "pairs");
    }
    ev.pairs.resize(K);
    for (auto& p : ev.pairs) {
      auto ls = next();
      if (!(ls >> std::quoted(p.station) >> p.location.s1 >> p.location.s2 >> p.x >> p.y))
        throw ParseError(lineno, "bad pair line");
    }
    {
      auto ls = next();
      expect_key(ls, "end");
    }
  }

  ModelFit m = condition(data, theta, prior);
  if (std::abs(m.log_posterior - stored_lp) > 1e-9 * std::max(1.0, std::abs(stored_lp)))
    log::info("reloaded fit: log posterior " + full(m.log_posterior) + " differs from stored " + full(stored_lp));
  return m;
}

ModelFit load_fit(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_fit(in);
}

}  // namespace fieldcal
