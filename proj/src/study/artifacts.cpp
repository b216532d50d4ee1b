/// @file artifacts.cpp
/// @brief Output staging, metadata sidecars, artifact writers and the log.

#include "hydrocal/study.hpp"
#include "hydrocal/csv.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>

namespace hydrocal::study {

using json = nlohmann::ordered_json;

namespace {

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json to_array(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

void write_meta(const std::filesystem::path& artifact, const ArtifactMeta& meta) {
  json j;
  j["artifact"] = artifact.filename().string();
  j["tool"] = "hydrocal";
  j["version"] = version();
  j["schema_version"] = kSchemaVersion;
  j["subcommand"] = meta.subcommand;
  j["config_hash"] = meta.config_hash;
  j["seed"] = meta.seed;
  write_json(artifact.string() + ".meta.json", j);
}

Staging::Staging(std::filesystem::path out_dir) : out_(std::move(out_dir)) {
  if (std::filesystem::exists(out_) && !std::filesystem::is_directory(out_))
    throw std::runtime_error("output path is not a directory: " + out_.string());
  created_ = !std::filesystem::exists(out_);
  stage_ = out_ / ".hydrocal-staging";
  std::filesystem::remove_all(stage_);
  std::filesystem::create_directories(stage_);
}

Staging::~Staging() {
  std::error_code ec;
  std::filesystem::remove_all(stage_, ec);
  if (!committed_ && created_ && std::filesystem::is_empty(out_, ec)) std::filesystem::remove(out_, ec);
}

std::filesystem::path Staging::path(const std::string& name) { return stage_ / name; }

std::filesystem::path Staging::artifact(const std::string& name, const ArtifactMeta& meta) {
  const auto p = stage_ / name;
  write_meta(p, meta);
  return p;
}

void Staging::commit() {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(stage_)) files.push_back(e.path());
  for (const auto& f : files) {
    const auto target = out_ / f.filename();
    std::filesystem::remove_all(target);
    std::filesystem::rename(f, target);
  }
  committed_ = true;
}

std::string station_csv_name(const std::string& stem, const std::string& station, const char* ext) {
  return stem + "_" + station + ext;
}

void write_analysis_artifacts(Staging& stage, const ArtifactMeta& meta, const std::vector<std::string>& names,
                              const GaugeAnalysis& a) {
  rom::save_rom(stage.artifact(station_csv_name("rom", a.station, ".json"), meta), a.rom);
  if (a.q2.size() > 0) {
    csv::Writer w(stage.artifact(station_csv_name("q2", a.station), meta));
    w.header(std::vector<std::string>{"time_s", "q2"});
    for (Eigen::Index i = 0; i < a.q2.size(); ++i)
      w.row({a.rom.times.empty() ? std::to_string(i) : csv::format(a.rom.times[static_cast<std::size_t>(i)]),
             std::isfinite(a.q2(i)) ? csv::format(a.q2(i)) : "nan"});
  }
  if (a.gsi.total.size() > 0) {
    gsa::write_gsi_csv(stage.artifact(station_csv_name("gsi", a.station), meta), names, a.gsi,
                       a.intervals ? &*a.intervals : nullptr);
    std::ofstream out(stage.artifact(station_csv_name("chord", a.station, ".json"), meta), std::ios::binary);
    out << gsa::chord_graph_json(gsa::chord_graph(names, a.gsi)) << '\n';
  }
  if (a.convergence)
    gsa::write_convergence_csv(stage.artifact(station_csv_name("convergence", a.station), meta), names, *a.convergence);
}

void write_twin_artifacts(Staging& stage, const ArtifactMeta& meta, const TwinReport& r) {
  doe::write_design(stage.artifact("design.csv", meta), r.design);
  if (r.validation.rows() > 0) doe::write_design(stage.artifact("validation_design.csv", meta), r.validation);
  write_ledger_csv(stage.artifact("ledger.csv", meta), r.evaluation.ledger);
  for (const auto& a : r.analyses) {
    const auto g = assim::station_index(a.station);
    rom::Snapshots s{r.evaluation.gauges[g], r.evaluation.times, a.station, "design.csv"};
    rom::write_snapshots(stage.artifact(station_csv_name("snapshots", a.station), meta), s);
    write_analysis_artifacts(stage, meta, r.names, a);
  }
  assim::write_observations(stage.artifact("observations.csv", meta), r.observations);
  assim::write_report_json(stage.artifact("calibration_report.json", meta), r.calibration);
  assim::write_trace_csv(stage.artifact("calibration_trace.csv", meta), r.calibration.names,
                         r.calibration.result.trace);

  json j;
  j["tool"] = "hydrocal";
  j["version"] = version();
  j["config_hash"] = meta.config_hash;
  j["seed"] = meta.seed;
  j["names"] = r.names;
  j["x_true"] = r.x_true;
  j["ranking"] = r.ranking;
  auto stations = json::array();
  for (const auto& a : r.analyses) {
    json s;
    s["station"] = a.station;
    s["modes"] = a.rom.modes();
    s["explained_variance"] = a.rom.explained;
    s["q2_mean"] = number_or_null(a.q2_mean);
    s["gsi_first"] = to_array(a.gsi.first);
    s["gsi_total"] = to_array(a.gsi.total);
    s["dropped_modes"] = a.gsi.dropped;
    if (a.intervals) {
      s["total_min"] = to_array(a.intervals->total_min);
      s["total_max"] = to_array(a.intervals->total_max);
    }
    stations.push_back(s);
  }
  j["stations"] = stations;
  j["min_q2"] = number_or_null(r.min_q2());
  json cal;
  cal["parameters"] = r.calibrated;
  cal["x0"] = to_array(r.calibration.x0);
  cal["x_map"] = to_array(r.calibration.x_map);
  cal["recovery_error"] = r.recovery_error;
  cal["status"] = assim::to_string(r.calibration.result.status);
  cal["iterations"] = r.calibration.result.iterations;
  cal["evaluations"] = r.calibration.result.evaluations;
  cal["observations"] = r.observations.size();
  cal["J"] = r.calibration.result.at_map.j;
  cal["J_b"] = r.calibration.result.at_map.jb;
  cal["J_obs"] = r.calibration.result.at_map.jobs;
  j["calibration"] = cal;
  write_json(stage.artifact("twin_report.json", meta), j);
}

Log::Log(std::string subcommand) : subcommand_(std::move(subcommand)) {}

std::filesystem::path Log::location() {
  if (const char* p = std::getenv("HYDROCAL_LOG"); p && *p) return p;
  return std::filesystem::current_path() / "hydrocal.log";
}

void Log::write(const char* level, const std::string& message) const {
  static std::mutex m;
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char stamp[40];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%S", &tm);
  std::string msg = message;
  for (auto& c : msg)
    if (c == '\n' || c == '\r') c = ' ';
  std::lock_guard lock(m);
  std::ofstream out(location(), std::ios::app);
  if (!out) return;
  char frac[8];
  std::snprintf(frac, sizeof frac, ".%03dZ", static_cast<int>(ms));
  out << stamp << frac << ' ' << level << ' ' << subcommand_ << ' ' << msg << '\n';
}

}  // namespace hydrocal::study
