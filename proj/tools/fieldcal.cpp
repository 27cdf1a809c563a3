// fieldcal: fit, predict, validate, variogram and simulate from the command line.
//
// Exit codes: 0 success, 1 internal error, 2 user or data error.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fieldcal/dataio.hpp"
#include "fieldcal/diagnostics.hpp"
#include "fieldcal/error.hpp"
#include "fieldcal/inference.hpp"
#include "fieldcal/log.hpp"
#include "fieldcal/prediction.hpp"

namespace fs = std::filesystem;
using namespace fieldcal;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUser = 2;

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw DataError("config: '" + key + "' expects a number, got '" + v + "'");
  }
}

long long to_integer(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long n = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw DataError("config: '" + key + "' expects an integer, got '" + v + "'");
  }
}

Vector to_doubles(const std::string& key, const std::string& v) {
  Vector out;
  for (const auto& item : split(v, ',')) out.push_back(to_double(key, item));
  return out;
}

// Flat key = value file. Repeated `stations` / `grid` keys accumulate; relative
// paths resolve against the config file's directory.
struct RunConfig {
  std::vector<fs::path> station_paths;
  std::vector<fs::path> grid_paths;
  double threshold = 15.0;
  PriorSpec prior;
  OptimizerOptions optimizer;
  std::optional<Hyperparameters> theta0;
  std::size_t holdout = 30;
  std::uint64_t seed = 0;
  fs::path output_dir = ".";

  // Canonical text of the effective settings, hashed into output headers.
  // The output directory is left out so relocated runs share a hash.
  std::string canonical() const {
    std::ostringstream o;
    o.precision(17);
    for (const auto& p : station_paths) o << "stations=" << p.string() << '\n';
    for (const auto& p : grid_paths) o << "grid=" << p.string() << '\n';
    o << "threshold=" << threshold << "\nbasis_degree=" << prior.basis_degree << "\nprior.b=";
    for (double v : prior.b) o << v << ',';
    o << "\nprior.B=";
    for (double v : prior.B.data()) o << v << ',';
    o << "\nprior.a=" << prior.a << "\nprior.d=" << prior.d << "\nsigma_y=" << prior.sigmaY
      << "\noptimizer.max_evals=" << optimizer.max_evals << "\noptimizer.tolerance=" << optimizer.simplex_tolerance
      << "\noptimizer.restarts=" << optimizer.restarts << "\noptimizer.initial_step=" << optimizer.initial_step;
    if (theta0) {
      const Vector v = theta_to_vector(*theta0);
      o << "\ntheta0=";
      for (double x : v) o << x << ',';
    }
    o << "\nholdout=" << holdout << "\nseed=" << seed << '\n';
    return o.str();
  }
  std::string hash() const { return hex64(fnv1a(canonical())); }
};

void apply_setting(RunConfig& c, const std::string& key, const std::string& value, const fs::path& base) {
  auto path = [&](const std::string& v) {
    fs::path p(v);
    return p.is_absolute() ? p : base / p;
  };
  if (key == "stations") {
    for (const auto& v : split(value, ',')) c.station_paths.push_back(path(v));
  } else if (key == "grid" || key == "grids") {
    for (const auto& v : split(value, ',')) c.grid_paths.push_back(path(v));
  } else if (key == "threshold") {
    c.threshold = to_double(key, value);
  } else if (key == "basis_degree") {
    c.prior.basis_degree = static_cast<int>(to_integer(key, value));
  } else if (key == "prior.b") {
    c.prior.b = to_doubles(key, value);
  } else if (key == "prior.B") {
    const Vector v = to_doubles(key, value);
    const auto q = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(v.size()))));
    if (q * q == v.size() && v.size() > 1) {
      c.prior.B = DenseMatrix(q, q);
      std::copy(v.begin(), v.end(), c.prior.B.data().begin());
    } else {
      c.prior.B = DenseMatrix::diagonal(v);
    }
  } else if (key == "prior.a") {
    c.prior.a = to_double(key, value);
  } else if (key == "prior.d") {
    c.prior.d = to_double(key, value);
  } else if (key == "sigma_y") {
    c.prior.sigmaY = to_double(key, value);
  } else if (key == "optimizer.max_evals") {
    c.optimizer.max_evals = static_cast<int>(to_integer(key, value));
  } else if (key == "optimizer.tolerance") {
    c.optimizer.simplex_tolerance = to_double(key, value);
  } else if (key == "optimizer.restarts") {
    c.optimizer.restarts = static_cast<int>(to_integer(key, value));
  } else if (key == "optimizer.initial_step") {
    c.optimizer.initial_step = to_double(key, value);
  } else if (key == "theta0") {
    const Vector v = to_doubles(key, value);
    if (v.size() != 7) throw DataError("config: theta0 needs omega,lambda2,phi1,phi2,nu1,nu2,phiX");
    c.theta0 = Hyperparameters{wrap_omega(v[0]), v[1], v[2], v[3], v[4], v[5], v[6]};
  } else if (key == "holdout") {
    const long long n = to_integer(key, value);
    if (n < 0) throw DataError("config: holdout must be >= 0");
    c.holdout = static_cast<std::size_t>(n);
  } else if (key == "seed") {
    c.seed = static_cast<std::uint64_t>(to_integer(key, value));
  } else if (key == "output_dir") {
    c.output_dir = path(value);
  } else {
    throw DataError("config: unknown key '" + key + "'");
  }
}

RunConfig load_config(const fs::path& file, const std::vector<std::string>& overrides) {
  RunConfig c;
  std::ifstream in(file);
  if (!in) throw DataError("cannot open config " + file.string());
  const fs::path base = file.has_parent_path() ? file.parent_path() : fs::path(".");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected key = value");
    apply_setting(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), base);
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw DataError("--set expects key=value, got '" + o + "'");
    apply_setting(c, trim(o.substr(0, eq)), trim(o.substr(eq + 1)), fs::current_path());
  }
  if (c.threshold < 0.0) throw DataError("config: threshold must be >= 0");
  try {
    c.prior.validate();
    c.optimizer.validate();
  } catch (const DomainError& e) {
    throw DataError(std::string("config: ") + e.what());
  } catch (const DimensionMismatch& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  return c;
}

std::string theta_line(const Hyperparameters& t) {
  std::ostringstream o;
  o << "theta omega=" << format6(t.omega) << " lambda2=" << format6(t.lambda2) << " phi1=" << format6(t.phi1)
    << " phi2=" << format6(t.phi2) << " nu1=" << format6(t.nu1) << " nu2=" << format6(t.nu2)
    << " phiX=" << format6(t.phiX);
  return o.str();
}

std::vector<std::string> header(const std::string& config_hash, const Hyperparameters& theta,
                                std::vector<std::string> extra = {}) {
  std::vector<std::string> h{std::string("fieldcal ") + FIELDCAL_VERSION, "config " + config_hash, theta_line(theta)};
  h.insert(h.end(), extra.begin(), extra.end());
  return h;
}

std::string header_text(const std::vector<std::string>& h) {
  std::string s;
  for (const auto& line : h) s += "# " + line + "\n";
  return s;
}

// Hash of the artifact a derived command reads, plus its own arguments.
std::string artifact_hash(const fs::path& artifact, const std::string& args) {
  std::ifstream in(artifact, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return hex64(fnv1a(args, fnv1a(ss.str())));
}

ModelFit read_fit(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("fit artifact " + path.string() + " does not exist");
  return load_fit(path);
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string config;
  std::vector<std::string> set;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
};

int cmd_fit(const FitArgs& a) {
  std::vector<std::string> overrides = a.set;
  if (a.output_dir) overrides.push_back("output_dir=" + *a.output_dir);
  if (a.seed) overrides.push_back("seed=" + std::to_string(*a.seed));
  RunConfig c = load_config(a.config, overrides);
  if (c.station_paths.empty()) throw DataError("config: no stations files");
  if (c.grid_paths.empty()) throw DataError("config: no grid files");
  c.optimizer.seed = c.seed;

  StationSet stations;
  for (const auto& p : c.station_paths) {
    StationSet s = load_stations(p);
    stations.insert(stations.end(), s.begin(), s.end());
  }
  std::vector<EventDataset> data;
  std::vector<std::string> skipped;
  for (const auto& gp : c.grid_paths) {
    const GridField grid = load_grid(gp);
    EventDataset ds;
    try {
      ds = pair_and_threshold(stations, grid, c.threshold);
    } catch (const EmptyDataset& e) {
      log::info(std::string("skipping: ") + e.what());
      skipped.push_back(e.what());
      continue;
    }
    if (ds.pairs.size() <= c.prior.q()) {
      const std::string msg = "event " + ds.event + " has " + std::to_string(ds.pairs.size()) +
                              " pairs above the threshold; need more than " + std::to_string(c.prior.q());
      log::error("warning: skipping " + msg);
      skipped.push_back(msg);
      continue;
    }
    data.push_back(std::move(ds));
  }
  if (data.empty()) {
    if (!skipped.empty()) throw EmptyDataset("no event has enough pairs: " + skipped.front());
    throw EmptyDataset("no events to fit");
  }

  const Hyperparameters theta0 = c.theta0 ? *c.theta0 : default_theta0(data);
  log::info("fitting " + std::to_string(data.size()) + " events");
  const ModelFit m = fit(data, c.prior, c.optimizer, theta0);
  for (const auto& w : m.warnings) log::error("warning: " + w);

  fs::create_directories(c.output_dir);
  const auto h = header(c.hash(), m.theta,
                        {"seed " + std::to_string(c.seed), "evaluations " + std::to_string(m.evaluations)});
  write_file_atomic(c.output_dir / "fit.out", serialize_fit(m, h));

  std::ostringstream csv;
  csv << header_text(h) << "event,K,beta0,beta1,beta2,sigma_hat,sigma_hat2,lambda2_sigma_hat2,sigma_y2,nugget_ok\n";
  const double sy2 = c.prior.sigmaY * c.prior.sigmaY;
  for (const auto& e : m.events) {
    csv << e.event << ',' << e.K;
    for (std::size_t i = 0; i < 3; ++i) csv << ',' << (i < e.beta_hat.size() ? format6(e.beta_hat[i]) : "NA");
    const double split = m.theta.lambda2 * e.sigma_hat2;
    csv << ',' << format6(std::sqrt(e.sigma_hat2)) << ',' << format6(e.sigma_hat2) << ',' << format6(split) << ','
        << format6(sy2) << ',' << (sy2 <= split ? 1 : 0) << '\n';
  }
  write_file_atomic(c.output_dir / "fit_summary.csv", csv.str());

  std::cout << theta_line(m.theta) << "\nlog_posterior " << format6(m.log_posterior) << "\nevents " << m.events.size()
            << "\nwrote " << (c.output_dir / "fit.out").string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

// CSV with header naming s1, s2 and optionally x (extra columns ignored).
// Without an x column the simulated value is interpolated from `grid`.
std::vector<TargetSite> load_targets(const fs::path& path, const std::optional<GridField>& grid) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open points file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> cols;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    std::istringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cols.push_back(trim(c));
    break;
  }
  auto find = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < cols.size(); ++i)
      if (cols[i] == name) return i;
    return std::nullopt;
  };
  const auto i1 = find("s1"), i2 = find("s2");
  auto ix = find("x");
  if (!ix) ix = find("x_sim");
  if (!i1 || !i2) throw ParseError(lineno, "points header must name s1 and s2");
  if (!ix && !grid) throw DataError("points file has no x column; pass --grid to interpolate it");

  std::vector<TargetSite> out;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) f.push_back(trim(c));
    if (f.size() != cols.size()) throw ParseError(lineno, "expected " + std::to_string(cols.size()) + " fields");
    auto num = [&](std::size_t i) {
      try {
        std::size_t used = 0;
        const double d = std::stod(f[i], &used);
        if (used != f[i].size() || !std::isfinite(d)) throw std::invalid_argument(f[i]);
        return d;
      } catch (const std::exception&) {
        throw ParseError(lineno, "invalid number '" + f[i] + "'");
      }
    };
    TargetSite t{{num(*i1), num(*i2)}, 0.0};
    t.x = ix ? num(*ix) : interpolate_field(*grid, t.location.s1, t.location.s2);
    out.push_back(t);
  }
  if (out.empty()) throw EmptyDataset("points file " + path.string() + " lists no targets");
  return out;
}

IntervalLaw parse_law(const std::string& s) {
  if (s == "gauss") return IntervalLaw::gaussian;
  if (s == "t") return IntervalLaw::student_t;
  if (s == "auto") return IntervalLaw::automatic;
  throw DataError("--interval must be gauss, t or auto");
}

struct PredictArgs {
  std::string fit;
  std::string event;
  std::string grid;
  std::string points;
  std::string output = "predict";
  bool full_cov = false;
  std::string interval = "auto";
};

int cmd_predict(const PredictArgs& a) {
  if (a.grid.empty() && a.points.empty()) throw DataError("predict needs --grid or --points");
  const IntervalLaw law = parse_law(a.interval);
  const ModelFit m = read_fit(a.fit);
  const std::string hash = artifact_hash(a.fit, "predict|" + a.event + "|" + a.interval);
  std::optional<GridField> grid;
  if (!a.grid.empty()) grid = load_grid(a.grid);
  (void)m.event(a.event);

  const fs::path out(a.output);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const auto h = header(hash, m.theta, {"event " + a.event});

  if (!a.points.empty()) {
    const std::vector<TargetSite> targets = load_targets(a.points, grid);
    const PosteriorField pf = posterior_field(m, a.event, targets, a.full_cov);
    const Vector sd = pf.sd();
    std::ostringstream csv;
    csv << header_text(h) << "event,s1,s2,x_sim,post_mean,post_sd,lo95,hi95\n";
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const auto [lo, hi] = interval(pf, i, 0.95, law);
      csv << a.event << ',' << format6(targets[i].location.s1) << ',' << format6(targets[i].location.s2) << ','
          << format6(targets[i].x) << ',' << format6(pf.mean[i]) << ',' << format6(sd[i]) << ',' << format6(lo)
          << ',' << format6(hi) << '\n';
    }
    fs::path p = out;
    p += "_points.csv";
    write_file_atomic(p, csv.str());
    std::cout << "wrote " << p.string() << '\n';
    return kExitOk;
  }

  const PosteriorField pf = predict_grid(m, a.event, *grid, a.full_cov);
  const std::size_t n = pf.size();
  const double nan = std::nan("");
  Vector sd = pf.sd(), diff(n), ratio(n), mask(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double x = grid->values[k];
    if (std::isnan(pf.mean[k])) {
      sd[k] = diff[k] = ratio[k] = mask[k] = nan;
      continue;
    }
    diff[k] = pf.mean[k] - x;
    ratio[k] = x != 0.0 ? pf.mean[k] / x : nan;
    mask[k] = pf.extrapolated[k] ? 1.0 : 0.0;
  }
  auto emit = [&](const char* suffix, const Vector& v, const char* what) {
    std::ostringstream s;
    auto hh = h;
    hh.push_back(what);
    write_grid(s, grid_like(*grid, v), hh);
    fs::path p = out;
    p += suffix;
    write_file_atomic(p, s.str());
    std::cout << "wrote " << p.string() << '\n';
  };
  emit("_mean.fg", pf.mean, "posterior mean");
  emit("_sd.fg", sd, "posterior standard deviation");
  emit("_diff.fg", diff, "posterior mean minus simulated field");
  emit("_ratio.fg", ratio, "posterior mean over simulated field");
  emit("_mask.fg", mask, "1 where the simulated field is at or below the fitting threshold");
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ValidateArgs {
  std::string fit;
  std::string config;
  std::vector<std::string> set;
  std::optional<std::string> output_dir;
};

int cmd_validate(const ValidateArgs& a) {
  std::vector<std::string> overrides = a.set;
  if (a.output_dir) overrides.push_back("output_dir=" + *a.output_dir);
  const RunConfig c = load_config(a.config, overrides);
  const ModelFit m = read_fit(a.fit);
  const std::size_t q = m.prior.q();
  const auto h = header(artifact_hash(a.fit, c.canonical()), m.theta,
                        {"holdout " + std::to_string(c.holdout), "seed " + std::to_string(c.seed)});

  std::ostringstream errors, pivoted, summary;
  errors << header_text(h) << "event,station,s1,s2,x,y,pred_mean,pred_sd,std_error\n";
  pivoted << header_text(h) << "event,rank,original_index,station,value,qq_theoretical,qq_observed\n";
  summary << header_text(h) << "event,n_val,df1,df2,d_mh,p_value,raw_sum_sq\n";
  for (const auto& ev : m.events) {
    const std::uint64_t seed = c.seed ^ fnv1a(ev.event);
    const HoldoutSplit split = split_holdout(ev.data, c.holdout, q, seed);
    const EventDataset training[] = {split.training};
    const ModelFit mt = condition(training, m.theta, m.prior);
    const ValidationReport r = validate_event(mt, ev.event, split.validation);
    for (std::size_t i = 0; i < split.validation.size(); ++i) {
      const auto& p = split.validation[i];
      errors << ev.event << ',' << p.station << ',' << format6(p.location.s1) << ',' << format6(p.location.s2) << ','
             << format6(p.x) << ',' << format6(p.y) << ',' << format6(r.predictive_mean[i]) << ','
             << format6(r.predictive_sd[i]) << ',' << format6(r.standardized_errors[i]) << '\n';
    }
    for (std::size_t k = 0; k < r.pivoted.values.size(); ++k) {
      const std::size_t oi = r.pivoted.original_index[k];
      pivoted << ev.event << ',' << k << ',' << oi << ',' << split.validation[oi].station << ','
              << format6(r.pivoted.values[k]) << ',' << format6(r.qq_pairs[k].first) << ','
              << format6(r.qq_pairs[k].second) << '\n';
    }
    const auto& mh = r.mahalanobis;
    summary << ev.event << ',' << split.validation.size() << ',' << mh.df1 << ',' << mh.df2 << ','
            << format6(mh.statistic) << ',' << format6(mh.p_value) << ',' << format6(mh.raw_sum_sq) << '\n';
    std::cout << ev.event << ": D_MH " << format6(mh.statistic) << " p " << format6(mh.p_value) << '\n';
  }
  fs::create_directories(c.output_dir);
  write_file_atomic(c.output_dir / "validate_errors.csv", errors.str());
  write_file_atomic(c.output_dir / "validate_pivoted.csv", pivoted.str());
  write_file_atomic(c.output_dir / "validate_summary.csv", summary.str());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct VariogramArgs {
  std::string fit;
  std::string event;
  std::string variable = "h1";
  std::size_t bins = 15;
  std::size_t replicates = 200;
  std::uint64_t seed = 0;
  std::string output;
};

int cmd_variogram(const VariogramArgs& a) {
  const BinVariable var = parse_bin_variable(a.variable);
  if (a.bins < 3) throw DataError("--bins must be >= 3");
  const ModelFit m = read_fit(a.fit);
  const VariogramTable t = semivariogram(m, a.event, var, {a.bins, a.replicates, a.seed});
  const auto h = header(artifact_hash(a.fit, "variogram|" + a.event + "|" + a.variable + "|" + std::to_string(a.bins) +
                                                 "|" + std::to_string(a.replicates) + "|" + std::to_string(a.seed)),
                        m.theta, {"event " + a.event, "seed " + std::to_string(a.seed)});
  std::ostringstream csv;
  csv << header_text(h) << "variable,bin_mid,empirical,model,lo,hi,count,bin_lo,bin_hi\n";
  for (std::size_t b = 0; b < t.bins(); ++b)
    csv << bin_variable_name(var) << ',' << format6(t.bin_centers[b]) << ',' << format6(t.empirical[b]) << ','
        << format6(t.model[b]) << ',' << format6(t.lower95[b]) << ',' << format6(t.upper95[b]) << ',' << t.counts[b]
        << ',' << format6(t.bin_edges[b]) << ',' << format6(t.bin_edges[b + 1]) << '\n';
  const fs::path out = a.output.empty() ? fs::path("variogram_" + a.event + "_" + a.variable + ".csv") : fs::path(a.output);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_file_atomic(out, csv.str());
  std::cout << "fraction of bins inside 95% bounds: " << format6(t.fraction_inside()) << '\n'
            << "wrote " << out.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string fit;
  std::string event;
  std::string points;
  std::string grid;
  std::size_t n = 1;
  std::uint64_t seed = 0;
  std::string output;
};

int cmd_simulate(const SimulateArgs& a) {
  if (a.n == 0) throw DataError("-n must be >= 1");
  const ModelFit m = read_fit(a.fit);
  std::optional<GridField> grid;
  if (!a.grid.empty()) grid = load_grid(a.grid);
  const std::vector<TargetSite> targets = load_targets(a.points, grid);
  const PosteriorField pf = posterior_field(m, a.event, targets, true);
  const auto draws = sample_field(pf, a.n, a.seed);

  const auto h = header(artifact_hash(a.fit, "simulate|" + a.event + "|" + std::to_string(a.n) + "|" +
                                                 std::to_string(a.seed)),
                        m.theta, {"event " + a.event, "seed " + std::to_string(a.seed), "realizations " +
                                                                                            std::to_string(a.n)});
  std::ostringstream csv;
  csv << header_text(h) << "s1,s2,x_sim";
  for (std::size_t r = 0; r < a.n; ++r) csv << ",r" << (r + 1);
  csv << '\n';
  for (std::size_t i = 0; i < targets.size(); ++i) {
    csv << format6(targets[i].location.s1) << ',' << format6(targets[i].location.s2) << ',' << format6(targets[i].x);
    for (const auto& d : draws) csv << ',' << format6(d.values[i]);
    csv << '\n';
  }
  const fs::path out = a.output.empty() ? fs::path("simulate_" + a.event + ".csv") : fs::path(a.output);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_file_atomic(out, csv.str());
  std::cout << "wrote " << a.n << " realizations to " << out.string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibrate simulated gust fields against station measurements"};
  app.set_version_flag("--version", std::string("fieldcal ") + FIELDCAL_VERSION);
  app.require_subcommand(1);

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "Fit the hyperparameters and per-event summaries");
  fit_cmd->add_option("-c,--config", fa.config, "Config file (key = value)")->required();
  fit_cmd->add_option("--set", fa.set, "Override a config key (key=value), repeatable");
  fit_cmd->add_option("-o,--output-dir", fa.output_dir, "Output directory");
  fit_cmd->add_option("--seed", fa.seed, "Seed for optimizer restarts");

  PredictArgs pa;
  auto* pred_cmd = app.add_subcommand("predict", "Posterior of the actual field for one event");
  pred_cmd->add_option("-f,--fit", pa.fit, "Fit artifact")->required();
  pred_cmd->add_option("-e,--event", pa.event, "Event id")->required();
  pred_cmd->add_option("--grid", pa.grid, "Grid of simulated values (also used to fill x for --points)");
  pred_cmd->add_option("--points", pa.points, "CSV of target points (s1,s2[,x])");
  pred_cmd->add_option("-o,--output", pa.output, "Output path prefix");
  pred_cmd->add_flag("--full-cov", pa.full_cov, "Compute the joint covariance of the targets");
  pred_cmd->add_option("--interval", pa.interval, "Interval law: gauss, t or auto (t when df <= 30)");

  ValidateArgs va;
  auto* val_cmd = app.add_subcommand("validate", "Hold out stations and test the predictive distribution");
  val_cmd->add_option("-f,--fit", va.fit, "Fit artifact")->required();
  val_cmd->add_option("-c,--config", va.config, "Config file (holdout, seed, output_dir)")->required();
  val_cmd->add_option("--set", va.set, "Override a config key (key=value), repeatable");
  val_cmd->add_option("-o,--output-dir", va.output_dir, "Output directory");

  VariogramArgs ga;
  auto* var_cmd = app.add_subcommand("variogram", "Empirical and model semivariogram with 95% bounds");
  var_cmd->add_option("-f,--fit", ga.fit, "Fit artifact")->required();
  var_cmd->add_option("-e,--event", ga.event, "Event id")->required();
  var_cmd->add_option("--var", ga.variable, "Binning variable: h1, h2 or dx");
  var_cmd->add_option("--bins", ga.bins, "Number of equal-count bins");
  var_cmd->add_option("--replicates", ga.replicates, "Monte Carlo replicates for the bounds");
  var_cmd->add_option("--seed", ga.seed, "Seed for the replicates");
  var_cmd->add_option("-o,--output", ga.output, "Output CSV");

  SimulateArgs sa;
  auto* sim_cmd = app.add_subcommand("simulate", "Draw realizations of the actual field");
  sim_cmd->add_option("-f,--fit", sa.fit, "Fit artifact")->required();
  sim_cmd->add_option("-e,--event", sa.event, "Event id")->required();
  sim_cmd->add_option("--points", sa.points, "CSV of target points (s1,s2[,x])")->required();
  sim_cmd->add_option("--grid", sa.grid, "Grid used to fill x when the points file has none");
  sim_cmd->add_option("-n", sa.n, "Number of realizations");
  sim_cmd->add_option("--seed", sa.seed, "Random seed");
  sim_cmd->add_option("-o,--output", sa.output, "Output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUser;
  }

  try {
    if (*fit_cmd) return cmd_fit(fa);
    if (*pred_cmd) return cmd_predict(pa);
    if (*val_cmd) return cmd_validate(va);
    if (*var_cmd) return cmd_variogram(ga);
    if (*sim_cmd) return cmd_simulate(sa);
  } catch (const DataError& e) {
    log::error(std::string("error: ") + e.what());
    return kExitUser;
  } catch (const std::exception& e) {
    log::error(std::string("internal error: ") + e.what());
    return kExitInternal;
  }
  return kExitInternal;
}
