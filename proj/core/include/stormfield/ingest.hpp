#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stormfield/csv.hpp"
#include "stormfield/lattice.hpp"
#include "stormfield/model.hpp"

namespace stormfield {

/// Marshall-Palmer style z-R conversion, R = (10^(z/10) / 200)^0.625 for z > 0, else 0.
double z_to_rate(double z_dbz);

struct PolarRecord {
  int time_index = 1;       // 1-based observation time
  double azimuth_deg = 0.0; // clockwise from north
  int range_bin = 1;
  double z_dbz = 0.0;
};

struct RadarGeometry {
  GridSpec grid;
  double range_bin_m = 150.0;
};

/// 0-based linear cell containing a polar sample, or nullopt outside the
/// domain. The grid is centred on the radar and spans n * cell_size_m.
std::optional<int> polar_to_cell(double azimuth_deg, int range_bin, const RadarGeometry& geometry);

/// Rates per observation time and cell (times x N); NaN marks cells with no return.
struct RateGrid {
  Eigen::MatrixXd rate;
};

RateGrid ingest_radar_polar(std::span<const PolarRecord> records, int times, const RadarGeometry& geometry);

struct GaugeRecord {
  int time_index = 1;  // 1-based gauge sub-interval
  std::string gauge_id;
  double accum_mm = 0.0;
};

struct GaugeMeta {
  std::string gauge_id;
  int row = 1;  // 1-based, north axis
  int col = 1;  // 1-based, east axis
};

struct GaugeRates {
  std::vector<std::string> ids;
  std::vector<int> cells;  // 0-based linear cell per gauge
  Eigen::MatrixXd rate;    // times x gauges, mm/h, NaN when no record
};

/// Sum sub-interval accumulations into observation windows and convert to
/// mm/h by the factor 60 / obs_interval_min. Gauges are ordered as in `meta`.
GaugeRates ingest_gauges(std::span<const GaugeRecord> records, std::span<const GaugeMeta> meta, int times,
                         double obs_interval_min, double gauge_interval_min, const GridSpec& grid);

/// Combine radar and gauge rates into a transformed, censor-flagged set.
ObservationSet build_observations(const RateGrid& radar, const GaugeRates& gauges);

// CSV readers for the documented file schemas. Errors carry file and line.
std::vector<PolarRecord> read_polar_records(const CsvTable& table);
std::vector<GaugeRecord> read_gauge_records(const CsvTable& table);
std::vector<GaugeMeta> read_gauge_meta(const CsvTable& table);
RateGrid read_radar_grid(const CsvTable& table, int times, const GridSpec& grid);

}  // namespace stormfield
