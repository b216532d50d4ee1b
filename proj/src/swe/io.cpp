#include "hydrocal/csv.hpp"
#include "hydrocal/swe.hpp"

#include <cmath>

namespace hydrocal::swe {

ChannelGeometry load_geometry_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto cx = table.column("x");
  const auto cz = table.column("zb");
  const auto cn = table.column("zone");
  ChannelGeometry g;
  for (const auto& row : table.rows) {
    g.x.push_back(csv::to_double(row[cx], path.string()));
    g.zb.push_back(csv::to_double(row[cz], path.string()));
    const auto zone = csv::parse_int(row[cn]);
    if (!zone) throw csv::CsvError("invalid zone id '" + row[cn] + "' in " + path.string());
    g.zone.push_back(static_cast<int>(*zone));
  }
  return g;
}

void write_geometry_csv(const std::filesystem::path& path, const ChannelGeometry& geometry) {
  csv::Writer out(path);
  out.row({"x", "zb", "zone"});
  for (std::size_t i = 0; i < geometry.size(); ++i)
    out.row({csv::format(geometry.x[i]), csv::format(geometry.zb[i]),
             std::to_string(geometry.zone[i])});
}

std::vector<TidalConstituent> load_constituents_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto ca = table.column("amplitude");
  const auto cp = table.column("period_s");
  const auto cph = table.column("phase_rad");
  const auto cp0 = table.column("phase0_rad");
  const auto cva = table.column("vel_amplitude");
  const auto cvp = table.column("vel_phase_rad");
  std::vector<TidalConstituent> out;
  for (const auto& row : table.rows) {
    TidalConstituent c;
    c.amplitude = csv::to_double(row[ca], path.string());
    c.period = csv::to_double(row[cp], path.string());
    c.phase = csv::to_double(row[cph], path.string());
    c.initial_phase = csv::to_double(row[cp0], path.string());
    c.velocity_amplitude = csv::to_double(row[cva], path.string());
    c.velocity_phase = csv::to_double(row[cvp], path.string());
    if (!(c.period > 0.0)) throw csv::CsvError("constituent period must be positive in " + path.string());
    out.push_back(c);
  }
  return out;
}

void write_constituents_csv(const std::filesystem::path& path,
                            std::span<const TidalConstituent> constituents) {
  csv::Writer out(path);
  out.row({"amplitude", "period_s", "phase_rad", "phase0_rad", "vel_amplitude", "vel_phase_rad"});
  for (const auto& c : constituents)
    out.numbers(std::vector<double>{c.amplitude, c.period, c.phase, c.initial_phase,
                                    c.velocity_amplitude, c.velocity_phase});
}

std::vector<std::pair<double, double>> load_hydrograph_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto ct = table.column("time_s");
  const auto cq = table.column("discharge");
  std::vector<std::pair<double, double>> out;
  for (const auto& row : table.rows)
    out.emplace_back(csv::to_double(row[ct], path.string()), csv::to_double(row[cq], path.string()));
  return out;
}

}  // namespace hydrocal::swe
