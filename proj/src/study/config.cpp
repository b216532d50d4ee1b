/// @file config.cpp
/// @brief YAML study files.

#include "hydrocal/study.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#ifndef HYDROCAL_VERSION
#define HYDROCAL_VERSION "0.0.0"
#endif

namespace hydrocal::study {

const char* version() { return HYDROCAL_VERSION; }

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 0x100000001b3ULL;
  }
  return state;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(stream) + index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

doe::ParameterSpace StudyConfig::space() const {
  doe::ParameterSpace s;
  for (const auto& p : parameters) {
    s.names.push_back(p.name);
    s.bounds.emplace_back(p.lo, p.hi);
  }
  return s;
}

std::vector<sim::ParameterBinding> StudyConfig::bindings() const {
  std::vector<sim::ParameterBinding> b;
  for (const auto& p : parameters) b.push_back({p.name, p.keyword, p.zone});
  return b;
}

std::vector<double> StudyConfig::nominal() const {
  std::vector<double> v;
  for (const auto& p : parameters) v.push_back(p.nominal);
  return v;
}

std::vector<std::string> StudyConfig::names() const {
  std::vector<std::string> v;
  for (const auto& p : parameters) v.push_back(p.name);
  return v;
}

std::size_t StudyConfig::parameter_index(const std::string& name) const {
  for (std::size_t k = 0; k < parameters.size(); ++k)
    if (parameters[k].name == name) return k;
  throw ConfigError("unknown parameter '" + name + "'");
}

std::filesystem::path StudyConfig::observation_case() const {
  return calibration.case_path ? *calibration.case_path : case_path;
}

namespace {

std::string where(const YAML::Node& n) {
  if (n.Mark().is_null()) return "";
  return " (line " + std::to_string(n.Mark().line + 1) + ")";
}

template <class T>
T get(const YAML::Node& n, const std::string& key) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("'" + key + "' has the wrong type" + where(n));
  }
}

void check_keys(const YAML::Node& map, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!map.IsMap()) throw ConfigError("'" + section + "' must be a mapping" + where(map));
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!ok.count(key)) throw ConfigError("unknown key '" + (section.empty() ? key : section + "." + key) + "'" + where(kv.first));
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative()) path = base / path;
  return path.lexically_normal();
}

std::filesystem::path existing(const std::filesystem::path& base, const YAML::Node& n, const std::string& key) {
  const auto p = resolve(base, get<std::string>(n, key));
  if (!std::filesystem::is_regular_file(p)) throw ConfigError("'" + key + "' refers to a missing file: " + p.string());
  return p;
}

int positive_int(const YAML::Node& n, const std::string& key) {
  const int v = get<int>(n, key);
  if (v < 1) throw ConfigError("'" + key + "' must be positive" + where(n));
  return v;
}

}  // namespace

StudyConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                         const std::filesystem::path& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed YAML: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("the study file must be a mapping");
  check_keys(root, "", {"schema_version", "case", "parameters", "gauges", "seed", "workers", "doe", "rom", "gsa",
                        "calibration", "twin"});

  StudyConfig c;
  c.source = source;
  c.hash = hex64(fnv1a64(text));

  if (!root["schema_version"]) throw ConfigError("missing 'schema_version'");
  if (get<int>(root["schema_version"], "schema_version") != kSchemaVersion)
    throw ConfigError("unsupported schema_version, expected " + std::to_string(kSchemaVersion));
  if (!root["case"]) throw ConfigError("missing 'case'");
  c.case_path = existing(base_dir, root["case"], "case");

  const auto params = root["parameters"];
  if (!params || !params.IsSequence() || params.size() == 0) throw ConfigError("'parameters' must be a non-empty list");
  std::set<std::string> seen;
  for (const auto& p : params) {
    check_keys(p, "parameters[]", {"name", "keyword", "zone", "bounds", "nominal"});
    ParameterSpec s;
    if (!p["name"] || !p["keyword"] || !p["bounds"]) throw ConfigError("a parameter needs name, keyword and bounds" + where(p));
    s.name = get<std::string>(p["name"], "name");
    if (!seen.insert(s.name).second) throw ConfigError("parameter '" + s.name + "' is listed twice");
    s.keyword = get<std::string>(p["keyword"], "keyword");
    if (p["zone"]) s.zone = get<int>(p["zone"], "zone");
    const auto b = get<std::vector<double>>(p["bounds"], "bounds");
    if (b.size() != 2 || !std::isfinite(b[0]) || !std::isfinite(b[1]) || !(b[0] < b[1]))
      throw ConfigError("bounds of '" + s.name + "' must be [lo, hi] with lo < hi");
    s.lo = b[0];
    s.hi = b[1];
    s.nominal = p["nominal"] ? get<double>(p["nominal"], "nominal") : 0.5 * (s.lo + s.hi);
    if (!(s.nominal >= s.lo && s.nominal <= s.hi))
      throw ConfigError("nominal value of '" + s.name + "' lies outside its bounds");
    c.parameters.push_back(std::move(s));
  }
  try {
    sim::validate_bindings(c.bindings());
  } catch (const std::exception& e) {
    throw ConfigError(std::string("parameter binding: ") + e.what());
  }

  if (root["gauges"]) {
    for (const auto& g : get<std::vector<std::string>>(root["gauges"], "gauges")) {
      try {
        c.gauges.push_back(assim::station_name(assim::station_index(g)));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("gauges: ") + e.what());
      }
    }
  }
  sim::CaseConfig cas;
  try {
    cas = sim::parse_case_file(c.case_path);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("case: ") + e.what());
  }
  for (const auto& p : c.parameters)
    if (p.zone && static_cast<std::size_t>(*p.zone) >= cas.strickler.size())
      throw ConfigError("parameter binding: " + p.name + " refers to zone " + std::to_string(*p.zone) +
                        " but the case has " + std::to_string(cas.strickler.size()) + " friction zones");
  for (const auto& g : c.gauges)
    if (assim::station_index(g) >= cas.gauges.size())
      throw ConfigError("gauges: station " + g + " is not among the " + std::to_string(cas.gauges.size()) +
                        " case gauges");

  if (root["seed"]) c.seed = get<std::uint64_t>(root["seed"], "seed");
  if (root["workers"]) c.workers = positive_int(root["workers"], "workers");

  if (const auto d = root["doe"]) {
    check_keys(d, "doe", {"n", "scheme", "anneal_iterations"});
    if (d["n"]) c.doe.n = positive_int(d["n"], "doe.n");
    if (d["scheme"]) {
      try {
        c.doe.scheme = doe::scheme_from_string(get<std::string>(d["scheme"], "doe.scheme"));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("doe.scheme: ") + e.what());
      }
    }
    if (d["anneal_iterations"]) c.doe.anneal_iterations = get<int>(d["anneal_iterations"], "doe.anneal_iterations");
  }
  if (const auto r = root["rom"]) {
    check_keys(r, "rom", {"threshold", "max_degree", "validation_n"});
    if (r["threshold"]) c.rom.threshold = get<double>(r["threshold"], "rom.threshold");
    if (!(c.rom.threshold > 0.0 && c.rom.threshold <= 1.0)) throw ConfigError("rom.threshold must lie in (0, 1]");
    if (r["max_degree"]) c.rom.max_degree = positive_int(r["max_degree"], "rom.max_degree");
    if (r["validation_n"]) c.rom.validation_n = get<int>(r["validation_n"], "rom.validation_n");
  }
  if (const auto g = root["gsa"]) {
    check_keys(g, "gsa", {"repetitions", "convergence_sizes"});
    if (g["repetitions"]) c.gsa.repetitions = get<int>(g["repetitions"], "gsa.repetitions");
    if (g["convergence_sizes"]) c.gsa.convergence_sizes = get<std::vector<int>>(g["convergence_sizes"], "gsa.convergence_sizes");
    for (int n : c.gsa.convergence_sizes)
      if (n < 2) throw ConfigError("gsa.convergence_sizes entries must be at least 2");
  }
  if (const auto k = root["calibration"]) {
    check_keys(k, "calibration", {"parameters", "count", "x0", "increment", "scheme", "increment_space",
                                  "max_iterations", "gradient_tolerance", "relative_reduction", "observations", "case"});
    auto& cal = c.calibration;
    if (k["parameters"]) cal.parameters = get<std::vector<std::string>>(k["parameters"], "calibration.parameters");
    for (const auto& n : cal.parameters) c.parameter_index(n);
    if (k["count"]) cal.count = positive_int(k["count"], "calibration.count");
    if (k["increment"]) cal.increment = get<double>(k["increment"], "calibration.increment");
    if (!(cal.increment > 0.0)) throw ConfigError("calibration.increment must be positive");
    if (k["scheme"]) {
      const auto s = get<std::string>(k["scheme"], "calibration.scheme");
      if (s == "forward") cal.scheme = assim::DifferenceScheme::Forward;
      else if (s == "central") cal.scheme = assim::DifferenceScheme::Central;
      else throw ConfigError("calibration.scheme must be forward or central");
    }
    if (k["increment_space"]) {
      const auto s = get<std::string>(k["increment_space"], "calibration.increment_space");
      if (s == "unit") cal.space = assim::IncrementSpace::Unit;
      else if (s == "raw") cal.space = assim::IncrementSpace::Raw;
      else throw ConfigError("calibration.increment_space must be unit or raw");
    }
    if (k["max_iterations"]) cal.max_iterations = positive_int(k["max_iterations"], "calibration.max_iterations");
    if (k["gradient_tolerance"]) cal.gradient_tolerance = get<double>(k["gradient_tolerance"], "calibration.gradient_tolerance");
    if (k["relative_reduction"]) cal.relative_reduction = get<double>(k["relative_reduction"], "calibration.relative_reduction");
    if (!(cal.relative_reduction >= 0.0)) throw ConfigError("calibration.relative_reduction must not be negative");
    if (k["observations"]) cal.observations = existing(base_dir, k["observations"], "calibration.observations");
    if (k["case"]) cal.case_path = existing(base_dir, k["case"], "calibration.case");
    if (const auto x0 = k["x0"]) {
      if (x0.IsMap()) {
        for (const auto& kv : x0) cal.x0[kv.first.as<std::string>()] = get<double>(kv.second, "calibration.x0");
      } else {
        const auto v = get<std::vector<double>>(x0, "calibration.x0");
        if (cal.parameters.empty() || v.size() != cal.parameters.size())
          throw ConfigError("a calibration.x0 list needs calibration.parameters of the same length; "
                            "use a name: value mapping otherwise");
        for (std::size_t i = 0; i < v.size(); ++i) cal.x0[cal.parameters[i]] = v[i];
      }
      for (const auto& [name, value] : cal.x0) {
        const auto& p = c.parameters[c.parameter_index(name)];
        if (!(value >= p.lo && value <= p.hi))
          throw ConfigError("calibration.x0 value for '" + name + "' lies outside its bounds");
      }
    }
  }
  if (const auto t = root["twin"]) {
    check_keys(t, "twin", {"x_true", "covariance"});
    TwinSettings tw;
    if (!t["x_true"]) throw ConfigError("missing 'twin.x_true'");
    tw.x_true = get<std::vector<double>>(t["x_true"], "twin.x_true");
    if (tw.x_true.size() != c.parameters.size()) throw ConfigError("twin.x_true needs one value per parameter");
    for (std::size_t k = 0; k < tw.x_true.size(); ++k)
      if (!(tw.x_true[k] >= c.parameters[k].lo && tw.x_true[k] <= c.parameters[k].hi))
        throw ConfigError("twin.x_true value for '" + c.parameters[k].name + "' lies outside its bounds");
    if (t["covariance"]) {
      const auto v = get<std::string>(t["covariance"], "twin.covariance");
      if (v == "generating") tw.covariance = TwinSettings::Covariance::Generating;
      else if (v == "observed") tw.covariance = TwinSettings::Covariance::Observed;
      else throw ConfigError("twin.covariance must be generating or observed");
    }
    c.twin = std::move(tw);
  }
  return c;
}

StudyConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open study file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto abs = std::filesystem::absolute(path);
  return parse_config(ss.str(), abs.parent_path(), abs);
}

}  // namespace hydrocal::study
