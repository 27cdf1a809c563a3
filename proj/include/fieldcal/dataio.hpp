#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fieldcal/covariance.hpp"

namespace fieldcal {

// One gust measurement. Coordinates are in the grid's (rotated-grid) system.
struct StationRecord {
  std::string event;
  std::string station;
  double s1 = 0.0;
  double s2 = 0.0;
  double gust = 0.0;  // m/s
};

using StationSet = std::vector<StationRecord>;

// CSV with header `event,station,s1,s2,gust`. Throws ParseError (1-based line)
// and DuplicateStation.
StationSet parse_stations(std::istream& in);
StationSet load_stations(const std::filesystem::path& path);

// Regular grid of simulated intensities. Cell (i, j) has its center at
// (origin1 + i * spacing1, origin2 + j * spacing2) and is stored at
// values[i * n2 + j]. Missing cells hold NaN.
struct GridField {
  std::string event;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  double origin1 = 0.0;
  double origin2 = 0.0;
  double spacing1 = 1.0;
  double spacing2 = 1.0;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const { return values[i * n2 + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * n2 + j]; }
  bool missing(std::size_t i, std::size_t j) const;
  SpacePoint cell_center(std::size_t i, std::size_t j) const;
  // Closed hull of the cell centers.
  bool contains(double s1, double s2) const;

  void validate() const;
};

// Text format:
//   FIELDGRID v1
//   event <id>
//   dims <n1> <n2>
//   origin <o1> <o2>
//   spacing <d1> <d2>
//   n1*n2 whitespace-separated values, row-major, NA for missing.
// Lines starting with '#' are comments.
GridField parse_grid(std::istream& in);
GridField load_grid(const std::filesystem::path& path);
// 6 significant digits; `header` lines are written as '#' comments first.
void write_grid(std::ostream& out, const GridField& grid, std::span<const std::string> header = {});

// Bilinear interpolation between cell centers. Throws OutOfDomain outside the
// closed hull and MissingNeighbor when a contributing cell is missing.
double interpolate_field(const GridField& grid, double s1, double s2);

struct DataPair {
  std::string station;
  SpacePoint location;  // grid coordinates, before the model rotation
  double x = 0.0;       // simulated intensity at the station
  double y = 0.0;       // measurement
};

struct EventDataset {
  std::string event;
  std::vector<DataPair> pairs;
  double threshold = 15.0;
};

struct PairingStats {
  std::size_t considered = 0;
  std::size_t outside_hull = 0;
  std::size_t missing_neighbor = 0;
  std::size_t below_threshold = 0;
};

// Optional map from station coordinates into the grid's coordinate system.
using CoordinateTransform = std::function<SpacePoint(SpacePoint)>;

// Pairs the stations of grid.event with interpolated simulated values and keeps
// those with x > u. Output is ordered by station id. Throws EmptyDataset.
EventDataset pair_and_threshold(const StationSet& stations, const GridField& grid, double u,
                                PairingStats* stats = nullptr, const CoordinateTransform& pre = {});

double rmse(std::span<const double> a, std::span<const double> b);

// Write to a sibling temporary file, then rename over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

// "%.6g"
std::string format6(double v);

}  // namespace fieldcal
