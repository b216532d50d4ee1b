/// @file calibrate.cpp
/// @brief Observation files, the observation operator and the calibration driver.

#include "hydrocal/assim.hpp"
#include "hydrocal/csv.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

namespace hydrocal::assim {

std::string station_name(std::size_t gauge) { return "G" + std::to_string(gauge + 1); }

std::size_t station_index(const std::string& station) {
  std::string_view s = csv::trim(station);
  if (!s.empty() && (s.front() == 'G' || s.front() == 'g')) s.remove_prefix(1);
  const auto k = csv::parse_int(s);
  if (!k || *k < 1) throw std::invalid_argument("unknown station '" + station + "'");
  return static_cast<std::size_t>(*k - 1);
}

std::vector<Observation> read_observations(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto cs = table.column("station"), ct = table.column("time_s"), cv = table.column("value");
  std::vector<Observation> out;
  for (const auto& row : table.rows) {
    Observation o;
    o.station = station_name(station_index(row[cs]));
    o.time = csv::to_double(row[ct], path.string());
    o.value = csv::to_double(row[cv], path.string());
    if (!std::isfinite(o.time) || !std::isfinite(o.value))
      throw csv::CsvError(path.string() + ": non-finite observation");
    out.push_back(o);
  }
  if (out.empty()) throw csv::CsvError(path.string() + ": no observations");
  return out;
}

void write_observations(const std::filesystem::path& path, const std::vector<Observation>& obs) {
  csv::Writer w(path);
  w.header(std::vector<std::string>{"station", "time_s", "value"});
  for (const auto& o : obs) w.row({o.station, csv::format(o.time), csv::format(o.value)});
}

std::vector<ObservationIndex> match_observations(const std::vector<Observation>& obs, const swe::GaugeRecord& rec,
                                                 double record_interval) {
  if (rec.times.empty()) throw std::invalid_argument("the model run produced no records");
  const double tol = 0.5 * record_interval;
  std::vector<ObservationIndex> out;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& o : obs) {
    const auto g = station_index(o.station);
    if (g >= rec.series.size())
      throw std::invalid_argument("station " + o.station + " is not among the " + std::to_string(rec.series.size()) +
                                  " gauges");
    const auto it = std::lower_bound(rec.times.begin(), rec.times.end(), o.time);
    std::size_t best = static_cast<std::size_t>(it - rec.times.begin());
    if (best == rec.times.size() || (best > 0 && o.time - rec.times[best - 1] < rec.times[best] - o.time)) --best;
    const double gap = std::abs(rec.times[best] - o.time);
    if (!(gap <= tol))
      throw std::invalid_argument("observation at t = " + csv::format(o.time) + " s for " + o.station +
                                  " is " + csv::format(gap) + " s from the nearest record; resample it onto the " +
                                  csv::format(record_interval) + " s record grid");
    if (!seen.insert({g, best}).second)
      throw std::invalid_argument("two observations for " + o.station + " map to the record at t = " +
                                  csv::format(rec.times[best]) + " s");
    out.push_back({g, best});
  }
  return out;
}

namespace {

Eigen::VectorXd extract(const swe::GaugeRecord& rec, const std::vector<ObservationIndex>& idx) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) v(static_cast<Eigen::Index>(i)) = rec.series[idx[i].gauge][idx[i].record];
  return v;
}

}  // namespace

CalibrationReport calibrate(sim::SimApi& api, const CalibrationSetup& s) {
  sim::validate_bindings(s.bindings);
  if (s.nominal.size() != s.bindings.size()) throw std::invalid_argument("nominal values do not match the bindings");
  if (s.free.empty()) throw std::invalid_argument("no parameters to calibrate");
  if (s.bounds.size() != s.free.size() || s.x0.size() != s.free.size())
    throw std::invalid_argument("bounds and X0 must have one entry per calibrated parameter");
  std::set<std::size_t> unique(s.free.begin(), s.free.end());
  if (unique.size() != s.free.size()) throw std::invalid_argument("a parameter is listed twice for calibration");
  for (auto k : s.free)
    if (k >= s.bindings.size()) throw std::invalid_argument("calibrated parameter index out of range");
  if (s.observations.empty()) throw std::invalid_argument("no observations");

  const auto config = sim::parse_case_file(s.case_path);
  const auto q = static_cast<Eigen::Index>(s.free.size());

  auto full = [&](const Eigen::VectorXd& x) {
    std::vector<double> v = s.nominal;
    for (Eigen::Index k = 0; k < q; ++k) v[s.free[static_cast<std::size_t>(k)]] = x(k);
    return v;
  };
  auto run = [&](const Eigen::VectorXd& x) { return sim::run_workflow(api, s.case_path, s.bindings, full(x)); };

  CalibrationReport report;
  report.x0 = Eigen::Map<const Eigen::VectorXd>(s.x0.data(), q);
  for (auto k : s.free) report.names.push_back(s.bindings[k].name);

  const auto prior_run = run(report.x0);
  const auto index = match_observations(s.observations, prior_run, config.record_interval);

  Problem p;
  p.x0 = report.x0;
  p.y.resize(static_cast<Eigen::Index>(s.observations.size()));
  for (std::size_t i = 0; i < s.observations.size(); ++i) p.y(static_cast<Eigen::Index>(i)) = s.observations[i].value;
  const auto cov = build_covariances(p.y, p.x0);
  p.r_diag = cov.r_diag;
  if (!s.r_diag.empty()) {
    if (s.r_diag.size() != s.observations.size())
      throw std::invalid_argument("one observation variance per observation expected");
    p.r_diag = Eigen::Map<const Eigen::VectorXd>(s.r_diag.data(), static_cast<Eigen::Index>(s.r_diag.size()));
  }
  p.b_diag = cov.b_diag;
  p.bounds = s.bounds;
  p.names = report.names;
  p.evaluator = [&](const Eigen::VectorXd& x) {
    const auto rec = run(x);
    if (rec.times != prior_run.times) throw std::runtime_error("record times changed between runs");
    return extract(rec, index);
  };

  report.result = minimize(p, s.options);
  report.x_map = report.result.x_map;
  report.b_diag = p.b_diag;
  report.r_diag = p.r_diag;

  const auto post_run = run(report.x_map);
  std::map<std::size_t, std::vector<std::size_t>> by_gauge;
  for (std::size_t i = 0; i < index.size(); ++i) by_gauge[index[i].gauge].push_back(i);
  for (const auto& [g, members] : by_gauge) {
    StationSeries ss;
    ss.station = station_name(g);
    ss.times = prior_run.times;
    ss.observed.assign(prior_run.times.size(), std::numeric_limits<double>::quiet_NaN());
    for (auto i : members) ss.observed[index[i].record] = s.observations[i].value;
    ss.before = prior_run.series[g];
    ss.after = post_run.series[g];
    report.series.push_back(std::move(ss));
  }
  return report;
}

namespace {

using json = nlohmann::ordered_json;

json to_array(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

}  // namespace

void write_report_json(const std::filesystem::path& path, const CalibrationReport& r) {
  json j;
  j["names"] = r.names;
  j["x0"] = to_array(r.x0);
  j["x_map"] = to_array(r.x_map);
  j["b_diag"] = to_array(r.b_diag);
  j["r_diag"] = to_array(r.r_diag);
  j["status"] = to_string(r.result.status);
  j["iterations"] = r.result.iterations;
  j["evaluations"] = r.result.evaluations;
  j["J"] = r.result.at_map.j;
  j["J_b"] = r.result.at_map.jb;
  j["J_obs"] = r.result.at_map.jobs;
  json trace;
  std::vector<int> iteration;
  std::vector<double> jv, jb, jo, gn;
  std::vector<long> ev;
  auto xs = json::array(), active = json::array();
  for (const auto& t : r.result.trace) {
    iteration.push_back(t.iteration);
    jv.push_back(t.j);
    jb.push_back(t.jb);
    jo.push_back(t.jobs);
    gn.push_back(t.gradient_norm);
    ev.push_back(t.evaluations);
    xs.push_back(to_array(t.x));
    active.push_back(t.active);
  }
  trace["iteration"] = iteration;
  trace["J"] = jv;
  trace["J_b"] = jb;
  trace["J_obs"] = jo;
  trace["gradient_norm"] = gn;
  trace["evaluations"] = ev;
  trace["x"] = xs;
  trace["active"] = active;
  j["trace"] = trace;
  auto series = json::array();
  for (const auto& s : r.series) {
    json e;
    e["station"] = s.station;
    e["time_s"] = s.times;
    e["observed"] = s.observed;
    e["before"] = s.before;
    e["after"] = s.after;
    series.push_back(e);
  }
  j["series"] = series;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                     const std::vector<TraceRecord>& trace) {
  csv::Writer w(path);
  std::vector<std::string> header{"iteration", "J", "J_b", "J_obs", "gradient_norm", "evaluations"};
  header.insert(header.end(), names.begin(), names.end());
  w.header(header);
  for (const auto& t : trace) {
    if (static_cast<std::size_t>(t.x.size()) != names.size())
      throw std::invalid_argument("name count does not match the trace");
    std::vector<std::string> row{std::to_string(t.iteration), csv::format(t.j), csv::format(t.jb),
                                 csv::format(t.jobs), csv::format(t.gradient_norm), std::to_string(t.evaluations)};
    for (auto v : t.x) row.push_back(csv::format(v));
    w.row(row);
  }
}

}  // namespace hydrocal::assim
