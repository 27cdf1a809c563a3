#include "fieldcal/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "fieldcal/error.hpp"
#include "fieldcal/log.hpp"
#include "fieldcal/simd.hpp"

namespace fieldcal {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

double parse_field(std::string_view s, std::size_t line, const char* what) {
  double v = 0.0;
  if (!parse_double(s, v) || !std::isfinite(v)) throw ParseError(line, std::string("invalid ") + what + " '" + std::string(s) + "'");
  return v;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

}  // namespace

std::string format6(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

StationSet parse_stations(std::istream& in) {
  StationSet out;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::set<std::pair<std::string, std::string>> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto fields = split_csv(body);
    if (!have_header) {
      static constexpr std::string_view expected[] = {"event", "station", "s1", "s2", "gust"};
      if (fields.size() != 5 || !std::equal(fields.begin(), fields.end(), std::begin(expected)))
        throw ParseError(lineno, "expected header 'event,station,s1,s2,gust'");
      have_header = true;
      continue;
    }
    if (fields.size() != 5) throw ParseError(lineno, "expected 5 fields, got " + std::to_string(fields.size()));
    StationRecord r;
    r.event = std::string(fields[0]);
    r.station = std::string(fields[1]);
    if (r.event.empty() || r.station.empty()) throw ParseError(lineno, "empty event or station id");
    r.s1 = parse_field(fields[2], lineno, "s1");
    r.s2 = parse_field(fields[3], lineno, "s2");
    r.gust = parse_field(fields[4], lineno, "gust");
    if (r.gust < 0.0) throw ParseError(lineno, "negative gust");
    if (!seen.emplace(r.event, r.station).second)
      throw DuplicateStation("duplicate station '" + r.station + "' for event '" + r.event + "' at line " +
                             std::to_string(lineno));
    out.push_back(std::move(r));
  }
  if (!have_header) throw ParseError(lineno == 0 ? 1 : lineno, "missing header");
  return out;
}

StationSet load_stations(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_stations(in);
}

bool GridField::missing(std::size_t i, std::size_t j) const { return std::isnan(at(i, j)); }

SpacePoint GridField::cell_center(std::size_t i, std::size_t j) const {
  return {origin1 + static_cast<double>(i) * spacing1, origin2 + static_cast<double>(j) * spacing2};
}

bool GridField::contains(double s1, double s2) const {
  constexpr double eps = 1e-12;
  const double u = (s1 - origin1) / spacing1;
  const double v = (s2 - origin2) / spacing2;
  return u >= -eps && v >= -eps && u <= static_cast<double>(n1 - 1) + eps && v <= static_cast<double>(n2 - 1) + eps;
}

void GridField::validate() const {
  if (n1 == 0 || n2 == 0) throw HeaderMismatch("grid dimensions must be positive");
  if (!(spacing1 > 0.0) || !(spacing2 > 0.0)) throw HeaderMismatch("grid spacing must be positive");
  if (values.size() != n1 * n2) throw ShortFile("grid holds " + std::to_string(values.size()) + " values, expected " + std::to_string(n1 * n2));
  for (double v : values)
    if (std::isinf(v)) throw DataError("grid holds an infinite value");
}

GridField parse_grid(std::istream& in) {
  std::vector<std::string> header;
  std::string line;
  std::ostringstream body;
  while (std::getline(in, line)) {
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (header.size() < 5) {
      header.emplace_back(t);
    } else {
      body << t << '\n';
    }
  }
  if (header.size() < 5) throw ShortFile("grid header is incomplete");

  auto keyed = [&](std::size_t idx, std::string_view key, std::size_t nvals) {
    std::istringstream ls(header[idx]);
    std::string k;
    ls >> k;
    if (k != key) throw HeaderMismatch("grid header line " + std::to_string(idx + 1) + ": expected '" + std::string(key) + "'");
    std::vector<std::string> vals;
    std::string v;
    while (ls >> v) vals.push_back(v);
    if (vals.size() != nvals) throw HeaderMismatch("grid header '" + std::string(key) + "' has wrong arity");
    return vals;
  };

  if (trim(header[0]) != "FIELDGRID v1") throw HeaderMismatch("expected 'FIELDGRID v1'");
  GridField g;
  g.event = keyed(1, "event", 1)[0];
  const auto dims = keyed(2, "dims", 2);
  const auto origin = keyed(3, "origin", 2);
  const auto spacing = keyed(4, "spacing", 2);
  auto num = [](const std::string& s, const char* what) {
    double v = 0.0;
    if (!parse_double(s, v) || !std::isfinite(v)) throw HeaderMismatch(std::string("invalid ") + what + " '" + s + "'");
    return v;
  };
  const double n1 = num(dims[0], "dims"), n2 = num(dims[1], "dims");
  if (n1 < 1 || n2 < 1 || n1 != std::floor(n1) || n2 != std::floor(n2)) throw HeaderMismatch("dims must be positive integers");
  g.n1 = static_cast<std::size_t>(n1);
  g.n2 = static_cast<std::size_t>(n2);
  g.origin1 = num(origin[0], "origin");
  g.origin2 = num(origin[1], "origin");
  g.spacing1 = num(spacing[0], "spacing");
  g.spacing2 = num(spacing[1], "spacing");
  if (!(g.spacing1 > 0.0) || !(g.spacing2 > 0.0)) throw HeaderMismatch("spacing must be positive");

  const std::size_t expected = g.n1 * g.n2;
  g.values.reserve(expected);
  std::istringstream vs(body.str());
  std::string tok;
  while (vs >> tok) {
    if (g.values.size() == expected) throw HeaderMismatch("grid holds more values than declared");
    if (tok == "NA") {
      g.values.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    double v = 0.0;
    if (!parse_double(tok, v) || !std::isfinite(v)) throw DataError("invalid grid value '" + tok + "'");
    g.values.push_back(v);
  }
  if (g.values.size() < expected)
    throw ShortFile("grid holds " + std::to_string(g.values.size()) + " values, declared " + std::to_string(expected));
  return g;
}

GridField load_grid(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_grid(in);
}

void write_grid(std::ostream& out, const GridField& grid, std::span<const std::string> header) {
  for (const auto& h : header) out << "# " << h << '\n';
  out << "FIELDGRID v1\n";
  out << "event " << grid.event << '\n';
  out << "dims " << grid.n1 << ' ' << grid.n2 << '\n';
  out << "origin " << format6(grid.origin1) << ' ' << format6(grid.origin2) << '\n';
  out << "spacing " << format6(grid.spacing1) << ' ' << format6(grid.spacing2) << '\n';
  for (std::size_t i = 0; i < grid.n1; ++i) {
    for (std::size_t j = 0; j < grid.n2; ++j) {
      if (j > 0) out << ' ';
      out << format6(grid.at(i, j));
    }
    out << '\n';
  }
}

double interpolate_field(const GridField& grid, double s1, double s2) {
  if (!grid.contains(s1, s2)) throw OutOfDomain("point (" + format6(s1) + ", " + format6(s2) + ") lies outside the grid");
  auto axis = [](double s, double origin, double spacing, std::size_t n, std::size_t& i0, double& frac) {
    const double u = std::clamp((s - origin) / spacing, 0.0, static_cast<double>(n - 1));
    if (n == 1) {
      i0 = 0;
      frac = 0.0;
      return;
    }
    i0 = std::min(static_cast<std::size_t>(std::floor(u)), n - 2);
    frac = u - static_cast<double>(i0);
  };
  std::size_t i0 = 0, j0 = 0;
  double a = 0.0, b = 0.0;
  axis(s1, grid.origin1, grid.spacing1, grid.n1, i0, a);
  axis(s2, grid.origin2, grid.spacing2, grid.n2, j0, b);

  const double w[2][2] = {{(1.0 - a) * (1.0 - b), (1.0 - a) * b}, {a * (1.0 - b), a * b}};
  double sum = 0.0;
  for (std::size_t di = 0; di < 2; ++di)
    for (std::size_t dj = 0; dj < 2; ++dj) {
      if (w[di][dj] == 0.0) continue;
      const double v = grid.at(i0 + di, j0 + dj);
      if (std::isnan(v)) throw MissingNeighbor("missing grid cell next to (" + format6(s1) + ", " + format6(s2) + ")");
      sum += w[di][dj] * v;
    }
  return sum;
}

EventDataset pair_and_threshold(const StationSet& stations, const GridField& grid, double u,
                                PairingStats* stats, const CoordinateTransform& pre) {
  PairingStats local;
  EventDataset ds;
  ds.event = grid.event;
  ds.threshold = u;
  for (const auto& r : stations) {
    if (r.event != grid.event) continue;
    ++local.considered;
    SpacePoint loc{r.s1, r.s2};
    if (pre) loc = pre(loc);
    if (!grid.contains(loc.s1, loc.s2)) {
      ++local.outside_hull;
      continue;
    }
    double x = 0.0;
    try {
      x = interpolate_field(grid, loc.s1, loc.s2);
    } catch (const MissingNeighbor&) {
      ++local.missing_neighbor;
      continue;
    }
    if (!(x > u)) {
      ++local.below_threshold;
      continue;
    }
    ds.pairs.push_back(DataPair{r.station, loc, x, r.gust});
  }
  std::sort(ds.pairs.begin(), ds.pairs.end(), [](const DataPair& a, const DataPair& b) { return a.station < b.station; });
  if (local.outside_hull + local.missing_neighbor > 0) {
    log::info("event " + grid.event + ": dropped " + std::to_string(local.outside_hull) + " stations outside the grid, " +
              std::to_string(local.missing_neighbor) + " next to missing cells");
  }
  if (stats) *stats = local;
  if (ds.pairs.empty())
    throw EmptyDataset("event " + grid.event + ": no station pairs exceed threshold " + format6(u));
  return ds;
}

double rmse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw DimensionMismatch("rmse needs equal, non-empty lengths");
  return std::sqrt(simd::sum_sq_diff(a, b) / static_cast<double>(a.size()));
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace fieldcal
