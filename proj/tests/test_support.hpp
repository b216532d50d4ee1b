/// @file test_support.hpp
/// @brief Fixtures shared by the unit and acceptance suites.
#pragma once

#include "hydrocal/swe.hpp"

#include <filesystem>
#include <fstream>
#include <string>

namespace hydrocal_test {

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("hydrocal_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// 30 km channel, 60 cells, closed upstream, one M2-like constituent.
inline hydrocal::swe::ChannelModel tidal_channel() {
  using namespace hydrocal::swe;
  ChannelModel m;
  const std::size_t n = 60;
  for (std::size_t i = 0; i < n; ++i) {
    m.geometry.x.push_back(250.0 + 500.0 * i);
    m.geometry.zb.push_back(-6.0 - 3.0 * i / (n - 1.0));
    m.geometry.zone.push_back(i < n / 2 ? 0 : 1);
  }
  m.set_friction({{35.0, 45.0}});
  m.forcing.constituents.push_back({.amplitude = 1.0, .period = 44712.0});
  m.upstream = UpstreamBoundary::Wall;
  m.downstream = DownstreamBoundary::Tidal;
  return m;
}

/// Writes geometry, constituents and a case file for a small tidal channel.
/// Returns the case file path.
inline std::filesystem::path write_case(const std::filesystem::path& dir, const std::string& extra = "",
                                        long ntimesteps = 240) {
  using namespace hydrocal::swe;
  const auto model = tidal_channel();
  write_geometry_csv(dir / "geometry.csv", model.geometry);
  write_constituents_csv(dir / "tides.csv", model.forcing.constituents);
  const auto path = dir / "channel.cas";
  write_text(path,
             "# test channel\n"
             "GEOMETRY_FILE = geometry.csv\n"
             "CONSTITUENTS_FILE = tides.csv\n"
             "DT = 30\n"
             "NTIMESTEPS = " + std::to_string(ntimesteps) + "\n"
             "RECORD_INTERVAL = 600\n"
             "SPINUP_S = 1800\n"
             "GAUGES = 5000; 12500.5; 29000\n"
             "STRICKLER = 35; 45\n"
             "UPSTREAM_BOUNDARY = WALL\n" + extra);
  return path;
}

/// Small three-parameter study over write_case(); @p extra is appended.
inline std::filesystem::path write_study(const std::filesystem::path& dir, const std::string& extra = "",
                                         const std::string& ks1_bounds = "[20, 60]") {
  write_case(dir);
  const auto path = dir / "study.yaml";
  write_text(path,
             "schema_version: 1\n"
             "case: channel.cas\n"
             "seed: 7\n"
             "parameters:\n"
             "  - {name: Ks1, keyword: MODEL.CHESTR, zone: 0, bounds: " + ks1_bounds + ", nominal: 35}\n"
             "  - {name: Ks2, keyword: MODEL.CHESTR, zone: 1, bounds: [20, 60], nominal: 45}\n"
             "  - {name: gamma, keyword: MODEL.SEALEVEL, bounds: [-0.5, 0.5], nominal: 0}\n"
             "doe: {n: 16, scheme: lhs-optimized, anneal_iterations: 100}\n"
             "rom: {threshold: 0.9995, max_degree: 2, validation_n: 8}\n" + extra);
  return path;
}

}  // namespace hydrocal_test
