#include "stormfield/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_map>

#include "stormfield/errors.hpp"

namespace stormfield {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string where(const CsvTable& t, std::size_t row) { return t.source + ":" + std::to_string(t.lines[row]); }

}  // namespace

double z_to_rate(double z_dbz) {
  if (!(z_dbz > 0.0)) return 0.0;
  return std::pow(std::pow(10.0, z_dbz / 10.0) / 200.0, 0.625);
}

std::optional<int> polar_to_cell(double azimuth_deg, int range_bin, const RadarGeometry& geometry) {
  const double r = range_bin * geometry.range_bin_m;
  const double az = azimuth_deg * std::numbers::pi / 180.0;
  const double x = r * std::sin(az);
  const double y = r * std::cos(az);
  const double cell = geometry.grid.cell_size_m;
  const double half = 0.5 * geometry.grid.n * cell;
  if (x < -half || x >= half || y < -half || y >= half) return std::nullopt;
  const int n = geometry.grid.n;
  const int i = std::min(static_cast<int>(std::floor((x + half) / cell)), n - 1);
  const int j = std::min(static_cast<int>(std::floor((y + half) / cell)), n - 1);
  return j * n + i;
}

RateGrid ingest_radar_polar(std::span<const PolarRecord> records, int times, const RadarGeometry& geometry) {
  geometry.grid.validate();
  const int cells = geometry.grid.cells();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(times, cells);
  Eigen::MatrixXi count = Eigen::MatrixXi::Zero(times, cells);
  for (const PolarRecord& rec : records) {
    if (rec.time_index < 1 || rec.time_index > times) {
      throw DataError("radar record time_index " + std::to_string(rec.time_index) + " outside 1.." +
                      std::to_string(times));
    }
    const auto cell = polar_to_cell(rec.azimuth_deg, rec.range_bin, geometry);
    if (!cell) continue;
    sum(rec.time_index - 1, *cell) += z_to_rate(rec.z_dbz);
    count(rec.time_index - 1, *cell) += 1;
  }
  RateGrid out;
  out.rate.resize(times, cells);
  for (int t = 0; t < times; ++t) {
    for (int c = 0; c < cells; ++c) {
      out.rate(t, c) = count(t, c) == 0 ? kNaN : sum(t, c) / count(t, c);
    }
  }
  return out;
}

GaugeRates ingest_gauges(std::span<const GaugeRecord> records, std::span<const GaugeMeta> meta, int times,
                         double obs_interval_min, double gauge_interval_min, const GridSpec& grid) {
  const double ratio = obs_interval_min / gauge_interval_min;
  const int per_window = static_cast<int>(std::lround(ratio));
  if (per_window < 1 || std::abs(ratio - per_window) > 1e-9) {
    throw DataError("gauge interval does not divide the observation interval");
  }
  GaugeRates out;
  std::unordered_map<std::string, int> index;
  for (const GaugeMeta& m : meta) {
    if (m.row < 1 || m.row > grid.n || m.col < 1 || m.col > grid.n) {
      throw DataError("gauge " + m.gauge_id + " lies outside the grid");
    }
    if (!index.emplace(m.gauge_id, static_cast<int>(out.ids.size())).second) {
      throw DataError("duplicate gauge id " + m.gauge_id);
    }
    out.ids.push_back(m.gauge_id);
    out.cells.push_back((m.row - 1) * grid.n + (m.col - 1));
  }
  const int gauges = static_cast<int>(out.ids.size());
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(times, gauges);
  Eigen::MatrixXi count = Eigen::MatrixXi::Zero(times, gauges);
  for (const GaugeRecord& rec : records) {
    const auto it = index.find(rec.gauge_id);
    if (it == index.end()) throw DataError("unknown gauge id " + rec.gauge_id);
    if (!(rec.accum_mm >= 0.0)) throw DataError("negative accumulation for gauge " + rec.gauge_id);
    if (rec.time_index < 1 || rec.time_index > times * per_window) {
      throw DataError("gauge time_index " + std::to_string(rec.time_index) + " does not align with the " +
                      std::to_string(times) + " observation windows");
    }
    const int window = (rec.time_index - 1) / per_window;
    sum(window, it->second) += rec.accum_mm;
    count(window, it->second) += 1;
  }
  const double to_rate = 60.0 / obs_interval_min;
  out.rate.resize(times, gauges);
  for (int t = 0; t < times; ++t) {
    for (int g = 0; g < gauges; ++g) out.rate(t, g) = count(t, g) == 0 ? kNaN : sum(t, g) * to_rate;
  }
  return out;
}

ObservationSet build_observations(const RateGrid& radar, const GaugeRates& gauges) {
  const auto times = static_cast<int>(radar.rate.rows());
  const auto cells = static_cast<int>(radar.rate.cols());
  if (gauges.rate.size() > 0 && gauges.rate.rows() != times) {
    throw DataError("radar and gauge series cover different numbers of times");
  }
  ObservationSet obs = ObservationSet::empty(times, cells, gauges.cells, gauges.ids);
  const auto put = [&obs](int t, int column, double rate) {
    if (std::isnan(rate)) return;
    if (rate < 0.0) throw DataError("negative rain rate");
    if (rate > 0.0) {
      obs.set(t, column, ObsFlag::kPositive, transform_obs(rate));
    } else {
      obs.set(t, column, ObsFlag::kCensored, 0.0);
    }
  };
  for (int t = 0; t < times; ++t) {
    for (int c = 0; c < cells; ++c) put(t, c, radar.rate(t, c));
    for (int g = 0; g < obs.gauges(); ++g) put(t, cells + g, gauges.rate(t, g));
  }
  obs.validate();
  return obs;
}

std::vector<PolarRecord> read_polar_records(const CsvTable& table) {
  const int ct = table.column("time_index");
  const int ca = table.column("azimuth_deg");
  const int cr = table.column("range_bin");
  const int cz = table.column("z_dbz");
  std::vector<PolarRecord> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    PolarRecord rec{table.get_int(r, ct), table.get_double(r, ca), table.get_int(r, cr), table.get_double(r, cz)};
    if (rec.azimuth_deg < 1.0 || rec.azimuth_deg > 360.0) throw DataError(where(table, r) + ": azimuth outside 1..360");
    if (rec.range_bin < 1 || rec.range_bin > 240) throw DataError(where(table, r) + ": range_bin outside 1..240");
    if (!std::isfinite(rec.z_dbz)) throw DataError(where(table, r) + ": non-finite reflectivity");
    out.push_back(rec);
  }
  return out;
}

std::vector<GaugeRecord> read_gauge_records(const CsvTable& table) {
  const int ct = table.column("time_index");
  const int cg = table.column("gauge_id");
  const int ca = table.column("accum_mm");
  std::vector<GaugeRecord> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    GaugeRecord rec{table.get_int(r, ct), table.get(r, cg), table.get_double(r, ca)};
    if (!(rec.accum_mm >= 0.0)) throw DataError(where(table, r) + ": accumulation must be >= 0");
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<GaugeMeta> read_gauge_meta(const CsvTable& table) {
  const int cg = table.column("gauge_id");
  const int cr = table.column("row");
  const int cc = table.column("col");
  std::vector<GaugeMeta> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    out.push_back({table.get(r, cg), table.get_int(r, cr), table.get_int(r, cc)});
  }
  return out;
}

RateGrid read_radar_grid(const CsvTable& table, int times, const GridSpec& grid) {
  const int ct = table.column("time_index");
  const int cr = table.column("row");
  const int cc = table.column("col");
  const int cv = table.column("rate_mm_h");
  const int cm = table.has_column("missing") ? table.column("missing") : -1;
  RateGrid out;
  out.rate = Eigen::MatrixXd::Constant(times, grid.cells(), kNaN);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const int t = table.get_int(r, ct);
    const int row = table.get_int(r, cr);
    const int col = table.get_int(r, cc);
    if (t < 1 || t > times) throw DataError(where(table, r) + ": time_index outside 1.." + std::to_string(times));
    if (row < 1 || row > grid.n || col < 1 || col > grid.n) throw DataError(where(table, r) + ": cell outside grid");
    if (cm >= 0 && table.get_int(r, cm) != 0) continue;
    const double v = table.get_double(r, cv);
    if (!(v >= 0.0)) throw DataError(where(table, r) + ": rate must be >= 0");
    out.rate(t - 1, (row - 1) * grid.n + (col - 1)) = v;
  }
  return out;
}

}  // namespace stormfield
