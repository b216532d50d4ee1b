/// @file case_file.cpp
/// @brief Steering-file parsing and model assembly.

#include "hydrocal/csv.hpp"
#include "hydrocal/sim_api.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace hydrocal::sim {
namespace {

enum class KeyType { Path, Real, Integer, RealList, Upstream, Downstream, Boolean };

const std::map<std::string, KeyType, std::less<>>& case_keys() {
  static const std::map<std::string, KeyType, std::less<>> keys{
      {"GEOMETRY_FILE", KeyType::Path},
      {"CONSTITUENTS_FILE", KeyType::Path},
      {"HYDROGRAPH_FILE", KeyType::Path},
      {"DT", KeyType::Real},
      {"NTIMESTEPS", KeyType::Integer},
      {"RECORD_INTERVAL", KeyType::Real},
      {"SPINUP_S", KeyType::Real},
      {"GAUGES", KeyType::RealList},
      {"SEALEVEL", KeyType::Real},
      {"TIDALRANGE", KeyType::Real},
      {"VELOCITYRANGE", KeyType::Real},
      {"UPSTREAM_DISCHARGE", KeyType::Real},
      {"ZREF", KeyType::Real},
      {"CFL", KeyType::Real},
      {"STRICKLER", KeyType::RealList},
      {"UPSTREAM_BOUNDARY", KeyType::Upstream},
      {"DOWNSTREAM_BOUNDARY", KeyType::Downstream},
      {"FRICTION", KeyType::Boolean},
  };
  return keys;
}

[[noreturn]] void fail(ErrorCode code, const std::filesystem::path& file, int line, const std::string& msg) {
  std::string where = file.string();
  if (line > 0) where += ":" + std::to_string(line);
  throw CaseError(code, where + ": " + msg);
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

swe::RecordSchedule CaseConfig::schedule() const {
  auto whole = [&](double a, const char* what) {
    const double ratio = a / dt;
    const double k = std::round(ratio);
    if (std::abs(ratio - k) > 1e-9 * std::max(1.0, ratio))
      throw std::invalid_argument(std::string(what) + " is not a whole multiple of DT");
    return static_cast<long>(k);
  };
  if (!(dt > 0.0)) throw std::invalid_argument("DT must be positive");
  swe::RecordSchedule s;
  s.dt = dt;
  s.spinup_steps = whole(spinup, "SPINUP_S");
  s.record_every = whole(record_interval, "RECORD_INTERVAL");
  if (s.record_every < 1) throw std::invalid_argument("RECORD_INTERVAL is shorter than DT");
  s.records = ntimesteps > s.spinup_steps ? (ntimesteps - s.spinup_steps) / s.record_every : 0;
  return s;
}

CaseConfig parse_case_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::CaseFileMissing, path, 0, "cannot open steering file");

  CaseConfig cfg;
  cfg.source = std::filesystem::absolute(path);
  const auto base = cfg.source.parent_path();
  bool friction = true;
  std::set<std::string, std::less<>> seen;

  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (lineno == 1 && raw.starts_with("\xEF\xBB\xBF")) raw.erase(0, 3);
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const auto line = csv::trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::MalformedCaseLine, path, lineno, "expected KEY = VALUE");
    const std::string key = std::string(csv::trim(line.substr(0, eq)));
    const std::string value = std::string(csv::trim(line.substr(eq + 1)));

    const auto it = case_keys().find(key);
    if (it == case_keys().end()) fail(ErrorCode::UnknownCaseKey, path, lineno, "unknown key " + key);
    if (!seen.insert(key).second) fail(ErrorCode::RepeatedCaseKey, path, lineno, "repeated key " + key);
    if (value.empty()) fail(ErrorCode::CaseTypeMismatch, path, lineno, key + " has no value");

    auto real = [&](std::string_view s) {
      const auto v = csv::parse_double(s);
      if (!v || !std::isfinite(*v))
        fail(ErrorCode::CaseTypeMismatch, path, lineno, key + " expects a real number, got '" + std::string(s) + "'");
      return *v;
    };

    switch (it->second) {
      case KeyType::Path: {
        std::filesystem::path p(value);
        if (p.is_relative()) p = base / p;
        if (key == "GEOMETRY_FILE") cfg.geometry_file = p;
        else if (key == "CONSTITUENTS_FILE") cfg.constituents_file = p;
        else cfg.hydrograph_file = p;
        break;
      }
      case KeyType::Real: {
        const double v = real(value);
        if (key == "DT") cfg.dt = v;
        else if (key == "RECORD_INTERVAL") cfg.record_interval = v;
        else if (key == "SPINUP_S") cfg.spinup = v;
        else if (key == "SEALEVEL") cfg.sealevel = v;
        else if (key == "TIDALRANGE") cfg.tidalrange = v;
        else if (key == "VELOCITYRANGE") cfg.velocityrange = v;
        else if (key == "UPSTREAM_DISCHARGE") cfg.discharge = v;
        else if (key == "ZREF") cfg.zref = v;
        else cfg.cfl = v;
        break;
      }
      case KeyType::Integer: {
        const auto v = csv::parse_int(value);
        if (!v) fail(ErrorCode::CaseTypeMismatch, path, lineno, key + " expects an integer, got '" + value + "'");
        cfg.ntimesteps = *v;
        break;
      }
      case KeyType::RealList: {
        std::vector<double> list;
        for (const auto& item : csv::split(value, ';')) list.push_back(real(csv::trim(item)));
        (key == "GAUGES" ? cfg.gauges : cfg.strickler) = std::move(list);
        break;
      }
      case KeyType::Upstream: {
        const auto v = upper(value);
        if (v == "WALL") cfg.upstream = swe::UpstreamBoundary::Wall;
        else if (v == "DISCHARGE") cfg.upstream = swe::UpstreamBoundary::Discharge;
        else fail(ErrorCode::CaseTypeMismatch, path, lineno, key + " expects WALL or DISCHARGE");
        break;
      }
      case KeyType::Downstream: {
        const auto v = upper(value);
        if (v == "WALL") cfg.downstream = swe::DownstreamBoundary::Wall;
        else if (v == "TIDAL") cfg.downstream = swe::DownstreamBoundary::Tidal;
        else fail(ErrorCode::CaseTypeMismatch, path, lineno, key + " expects WALL or TIDAL");
        break;
      }
      case KeyType::Boolean: {
        const auto v = upper(value);
        if (v == "TRUE" || v == "YES" || v == "1") friction = true;
        else if (v == "FALSE" || v == "NO" || v == "0") friction = false;
        else fail(ErrorCode::CaseTypeMismatch, path, lineno, key + " expects TRUE or FALSE");
        break;
      }
    }
  }

  for (const char* required : {"GEOMETRY_FILE", "DT", "NTIMESTEPS"})
    if (!seen.contains(required)) fail(ErrorCode::MissingCaseKey, path, 0, std::string("missing key ") + required);

  auto invalid = [&](const std::string& msg) { fail(ErrorCode::InvalidCaseValue, path, 0, msg); };
  if (!(cfg.dt > 0.0)) invalid("DT must be positive");
  if (cfg.ntimesteps < 0) invalid("NTIMESTEPS must be non-negative");
  if (!(cfg.record_interval > 0.0)) invalid("RECORD_INTERVAL must be positive");
  if (cfg.spinup < 0.0) invalid("SPINUP_S must be non-negative");
  if (!(cfg.cfl > 0.0 && cfg.cfl <= 1.0)) invalid("CFL must lie in (0, 1]");
  if (cfg.discharge < 0.0) invalid("UPSTREAM_DISCHARGE must be non-negative");
  if (cfg.strickler.empty()) invalid("STRICKLER is empty");
  for (double ks : cfg.strickler)
    if (!(ks > 0.0)) invalid("STRICKLER coefficients must be positive");
  if (!cfg.downstream && cfg.constituents_file) cfg.downstream = swe::DownstreamBoundary::Tidal;
  if (cfg.downstream == swe::DownstreamBoundary::Tidal && !cfg.constituents_file)
    invalid("DOWNSTREAM_BOUNDARY = TIDAL needs CONSTITUENTS_FILE");
  if (!cfg.downstream) cfg.downstream = swe::DownstreamBoundary::Wall;
  try {
    (void)cfg.schedule();
  } catch (const std::invalid_argument& e) {
    invalid(e.what());
  }
  if (!friction) cfg.strickler.clear();
  return cfg;
}

swe::ChannelModel build_model(const CaseConfig& cfg) {
  swe::ChannelModel m;
  try {
    m.geometry = swe::load_geometry_csv(cfg.geometry_file);
    if (cfg.constituents_file) m.forcing.constituents = swe::load_constituents_csv(*cfg.constituents_file);
    if (cfg.hydrograph_file) m.hydrograph = swe::load_hydrograph_csv(*cfg.hydrograph_file);
  } catch (const std::exception& e) {
    throw CaseError(ErrorCode::DataFileError, e.what());
  }
  try {
    m.geometry.validate();
    const auto zones = m.geometry.zone_count();
    if (cfg.strickler.empty()) {
      m.friction = false;
      m.cell_ks.assign(m.geometry.size(), 1.0);
    } else if (cfg.strickler.size() == 1) {
      m.set_friction({std::vector<double>(static_cast<std::size_t>(zones), cfg.strickler[0])});
    } else if (cfg.strickler.size() == static_cast<std::size_t>(zones)) {
      m.set_friction({cfg.strickler});
    } else {
      throw std::invalid_argument("STRICKLER lists " + std::to_string(cfg.strickler.size()) +
                                  " values for " + std::to_string(zones) + " zones");
    }
    for (double g : cfg.gauges) (void)swe::gauge_stencil(m.geometry.x, g);
    m.forcing.alpha = cfg.tidalrange;
    m.forcing.beta = cfg.velocityrange;
    m.forcing.gamma = cfg.sealevel;
    m.forcing.z_ref = cfg.zref;
    m.upstream = cfg.upstream;
    m.downstream = cfg.downstream.value_or(swe::DownstreamBoundary::Wall);
    m.discharge = cfg.discharge;
    m.cfl = cfg.cfl;
    m.validate();
  } catch (const std::exception& e) {
    throw CaseError(ErrorCode::Inconsistent, e.what());
  }
  return m;
}

}  // namespace hydrocal::sim
