// hydrocal: command-line driver for the calibration study pipeline.
//
//   hydrocal <subcommand> --config study.yaml --out DIR [--seed N] [--workers N]
//
// Subcommands chain through the output directory: doe writes the design,
// evaluate reads it, rom-fit reads the snapshots, and so on.

#include "hydrocal/csv.hpp"
#include "hydrocal/study.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace hydrocal;
using json = nlohmann::ordered_json;

namespace {

struct Options {
  fs::path config;
  fs::path out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool permissive = false;
};

struct Context {
  study::StudyConfig config;
  std::uint64_t seed = 0;
  int workers = 1;
  study::ArtifactMeta meta;
  const study::Log* log = nullptr;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int env_workers() {
  const char* v = std::getenv("HYDROCAL_WORKERS");
  if (!v || !*v) return 0;
  const auto n = csv::parse_int(v);
  if (!n || *n < 1 || *n > 1024) throw UsageError("HYDROCAL_WORKERS must be a positive integer");
  return static_cast<int>(*n);
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing input " + path.string() + "; run the earlier pipeline stage first");
  return json::parse(in);
}

fs::path input(const fs::path& dir, const std::string& name, const char* stage) {
  const auto p = dir / name;
  if (!fs::is_regular_file(p))
    throw std::runtime_error("missing input " + p.string() + "; run `hydrocal " + stage + "` first");
  return p;
}

std::vector<int> completed_rows(const fs::path& ledger) {
  const auto t = csv::read(ledger);
  const auto cr = t.column("row"), cs = t.column("status");
  std::vector<int> rows;
  for (const auto& r : t.rows)
    if (r[cs] == "ok") rows.push_back(static_cast<int>(*csv::parse_int(r[cr])));
  return rows;
}

// ---------------------------------------------------------------------------

void cmd_simulate(Context& c, study::Staging& stage) {
  const auto nominal = c.config.nominal();
  const auto rec = study::run_point(c.config, nominal);
  csv::Writer w(stage.artifact("simulation.csv", c.meta));
  std::vector<std::string> header{"time_s"};
  for (std::size_t g = 0; g < rec.series.size(); ++g) header.push_back(assim::station_name(g));
  w.header(header);
  for (std::size_t i = 0; i < rec.times.size(); ++i) {
    std::vector<double> row{rec.times[i]};
    for (const auto& s : rec.series) row.push_back(s[i]);
    w.numbers(row);
  }
  c.log->info("simulated " + std::to_string(rec.times.size()) + " records at " + std::to_string(rec.series.size()) +
              " gauges");
}

void cmd_doe(Context& c, study::Staging& stage) {
  const auto d = study::make_design(c.config, study::derive_seed(c.seed, study::Stream::Doe));
  doe::write_design(stage.artifact("design.csv", c.meta), d);
  c.log->info("design " + std::string(doe::to_string(d.scheme)) + " n=" + std::to_string(d.rows()) +
              " discrepancy=" + csv::format(doe::centered_l2_discrepancy(d.unit)));
}

void cmd_evaluate(Context& c, study::Staging& stage, bool permissive) {
  const auto d = doe::read_design(input(stage.out_dir(), "design.csv", "doe"));
  if (d.space.names != c.config.names()) throw std::runtime_error("design.csv does not match the study parameters");
  study::Evaluation ev;
  try {
    ev = study::evaluate_doe(c.config, d, c.workers,
                             permissive ? study::FailureMode::Permissive : study::FailureMode::Strict);
  } catch (const study::EvaluationFailed& e) {
    study::write_ledger_csv(stage.out_dir() / "ledger.csv", e.ledger());
    throw;
  }
  double wall = 0.0;
  for (const auto& r : ev.ledger.rows) {
    wall += r.wall_seconds;
    c.log->info("row " + std::to_string(r.row) + (r.ok ? " ok " : " failed ") + csv::format(r.wall_seconds) + " s" +
                (r.ok ? "" : ": " + r.message));
  }
  study::write_ledger_csv(stage.artifact("ledger.csv", c.meta), ev.ledger);
  for (std::size_t g = 0; g < ev.gauges.size(); ++g) {
    const auto station = assim::station_name(g);
    rom::write_snapshots(stage.artifact(study::station_csv_name("snapshots", station), c.meta),
                         {ev.gauges[g], ev.times, station, "design.csv"});
  }
  c.log->info(std::to_string(ev.ledger.completed()) + "/" + std::to_string(ev.ledger.rows.size()) +
              " rows completed, model time " + csv::format(wall) + " s");
}

void cmd_rom_fit(Context& c, study::Staging& stage) {
  const auto& dir = stage.out_dir();
  const auto d = doe::read_design(input(dir, "design.csv", "doe"));
  const auto design = study::subset_rows(d, completed_rows(input(dir, "ledger.csv", "evaluate")));
  json summary = json::array();
  for (auto g : study::analysed_gauges(c.config)) {
    const auto station = assim::station_name(g);
    const auto snap = rom::read_snapshots(input(dir, study::station_csv_name("snapshots", station), "evaluate"));
    const auto model = study::fit_rom(c.config, design, snap.values, snap.times, c.workers);
    rom::save_rom(stage.artifact(study::station_csv_name("rom", station, ".json"), c.meta), model);
    json s;
    s["station"] = station;
    s["modes"] = model.modes();
    s["explained_variance"] = model.explained;
    std::vector<double> loo;
    for (const auto& p : model.pce) loo.push_back(p.loo_error);
    s["loo_error"] = loo;
    summary.push_back(s);
    c.log->info(station + ": " + std::to_string(model.modes()) + " modes, explained " + csv::format(model.explained));
  }
  write_json(stage.artifact("rom_summary.json", c.meta), summary);
}

void cmd_rom_validate(Context& c, study::Staging& stage) {
  const auto& dir = stage.out_dir();
  const int n = c.config.rom.validation_n;
  if (n < 2) throw study::ConfigError("rom.validation_n must be at least 2 for validation");
  const auto val = doe::scale_design(
      doe::lhs(n, static_cast<int>(c.config.parameters.size()), study::derive_seed(c.seed, study::Stream::Validation)),
      c.config.space());
  const auto ev = study::evaluate_doe(c.config, val, c.workers);
  doe::write_design(stage.artifact("validation_design.csv", c.meta), val);
  json summary = json::array();
  for (auto g : study::analysed_gauges(c.config)) {
    study::GaugeAnalysis a;
    a.station = assim::station_name(g);
    a.rom = rom::load_rom(input(dir, study::station_csv_name("rom", a.station, ".json"), "rom-fit"));
    a.q2 = rom::q2(a.rom, val.scaled, ev.gauges[g]);
    a.q2_mean = rom::mean_finite(a.q2);
    csv::Writer w(stage.artifact(study::station_csv_name("q2", a.station), c.meta));
    w.header(std::vector<std::string>{"time_s", "q2"});
    for (Eigen::Index i = 0; i < a.q2.size(); ++i)
      w.row({csv::format(ev.times[static_cast<std::size_t>(i)]), std::isfinite(a.q2(i)) ? csv::format(a.q2(i)) : "nan"});
    json s;
    s["station"] = a.station;
    s["q2_mean"] = std::isfinite(a.q2_mean) ? json(a.q2_mean) : json(nullptr);
    summary.push_back(s);
    c.log->info(a.station + ": time-mean Q2 " + csv::format(a.q2_mean));
  }
  write_json(stage.artifact("validation.json", c.meta), summary);
}

void cmd_gsa(Context& c, study::Staging& stage) {
  const auto& dir = stage.out_dir();
  const auto names = c.config.names();
  std::vector<study::GaugeAnalysis> analyses;
  for (auto g : study::analysed_gauges(c.config)) {
    study::GaugeAnalysis a;
    a.station = assim::station_name(g);
    a.rom = rom::load_rom(input(dir, study::station_csv_name("rom", a.station, ".json"), "rom-fit"));
    if (a.rom.space.names != names) throw std::runtime_error("reduced model does not match the study parameters");
    a.gsi = gsa::generalized_indices(a.rom);
    analyses.push_back(std::move(a));
  }
  study::extend_gsa(c.config, c.seed, analyses, c.workers);
  std::vector<gsa::GeneralizedIndices> all;
  for (const auto& a : analyses) {
    gsa::write_gsi_csv(stage.artifact(study::station_csv_name("gsi", a.station), c.meta), names, a.gsi,
                       a.intervals ? &*a.intervals : nullptr);
    std::ofstream(stage.artifact(study::station_csv_name("chord", a.station, ".json"), c.meta), std::ios::binary)
        << gsa::chord_graph_json(gsa::chord_graph(names, a.gsi)) << '\n';
    if (a.convergence)
      gsa::write_convergence_csv(stage.artifact(study::station_csv_name("convergence", a.station), c.meta), names,
                                 *a.convergence);
    if (a.intervals && a.intervals->partial())
      for (const auto& f : a.intervals->failures)
        c.log->warn(a.station + ": repetition seed " + std::to_string(f.seed) + " failed: " + f.message);
    all.push_back(a.gsi);
  }
  json j;
  j["ranking"] = study::rank_by_total(names, all);
  write_json(stage.artifact("ranking.json", c.meta), j);
  c.log->info("ranking " + j["ranking"].dump());
}

void cmd_calibrate(Context& c, study::Staging& stage) {
  const auto& cal = c.config.calibration;
  if (!cal.observations) throw study::ConfigError("calibration.observations is required for calibrate");
  std::vector<std::string> free = cal.parameters;
  if (free.empty()) {
    const auto j = read_json(stage.out_dir() / "ranking.json");
    free = study::calibration_parameters(c.config, j.at("ranking").get<std::vector<std::string>>());
  }
  const auto obs = assim::read_observations(*cal.observations);
  const auto report = study::run_calibration(c.config, free, c.config.nominal(), obs, c.workers);
  assim::write_report_json(stage.artifact("calibration_report.json", c.meta), report);
  assim::write_trace_csv(stage.artifact("calibration_trace.csv", c.meta), report.names, report.result.trace);
  c.log->info("calibration " + assim::to_string(report.result.status) + " after " +
              std::to_string(report.result.iterations) + " iterations, " +
              std::to_string(report.result.evaluations) + " model runs");
}

void cmd_twin(Context& c, study::Staging& stage) {
  const auto report = study::twin_experiment(c.config, c.seed, c.workers);
  study::write_twin_artifacts(stage, c.meta, report);
  std::string rec;
  for (std::size_t i = 0; i < report.calibrated.size(); ++i)
    rec += " " + report.calibrated[i] + "=" + csv::format(report.recovery_error[i]);
  c.log->info("twin min Q2 " + csv::format(report.min_q2()) + ", calibration " +
              assim::to_string(report.calibration.result.status) + " in " +
              std::to_string(report.calibration.result.iterations) + " iterations, recovery error" + rec);
}

std::string escape(const std::string& s) { return json(s).dump(); }

void error_line(const std::string& subcommand, const std::string& kind, const std::string& message) {
  std::cerr << "{\"status\":\"error\",\"subcommand\":" << escape(subcommand) << ",\"kind\":" << escape(kind)
            << ",\"message\":" << escape(message) << "}\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hydrocal: sensitivity analysis and calibration of a tidal channel model"};
  app.set_version_flag("--version", std::string("hydrocal ") + study::version());
  app.require_subcommand(1);

  Options opt;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "run the case once at the nominal parameter values"},
      {"doe", "generate the design of experiments"},
      {"evaluate", "run the model at every design row"},
      {"rom-fit", "fit the PCA and polynomial chaos reduced models"},
      {"rom-validate", "compute Q2 of the reduced models on a fresh design"},
      {"gsa", "generalized sensitivity indices, intervals and chord graphs"},
      {"calibrate", "3D-Var calibration against observations"},
      {"twin", "full pipeline on synthetic observations from a known truth"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "study file (YAML)")->required();
    sub->add_option("--out", opt.out, "output directory")->required();
    sub->add_option("--seed", opt.seed, "study seed, overrides the study file");
    sub->add_option("--workers", opt.workers, "worker threads (default: HYDROCAL_WORKERS, then the study file)")
        ->check(CLI::Range(1, 1024));
    if (name == "evaluate") sub->add_flag("--permissive", opt.permissive, "keep going when design rows fail");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << '\n';
    error_line(app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name(), "usage", e.what());
    return 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  const study::Log log(name);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    Context c;
    c.log = &log;
    c.config = study::load_config(opt.config);
    c.seed = opt.seed ? *opt.seed : c.config.seed;
    const int env = env_workers();
    c.workers = opt.workers ? *opt.workers : env ? env : c.config.workers;
    c.meta = {name, c.config.hash, c.seed};
    log.info("start config=" + opt.config.string() + " hash=" + c.config.hash + " seed=" + std::to_string(c.seed) +
             " workers=" + std::to_string(c.workers) + " out=" + opt.out.string());

    study::Staging stage(opt.out);
    if (name == "simulate") cmd_simulate(c, stage);
    else if (name == "doe") cmd_doe(c, stage);
    else if (name == "evaluate") cmd_evaluate(c, stage, opt.permissive);
    else if (name == "rom-fit") cmd_rom_fit(c, stage);
    else if (name == "rom-validate") cmd_rom_validate(c, stage);
    else if (name == "gsa") cmd_gsa(c, stage);
    else if (name == "calibrate") cmd_calibrate(c, stage);
    else if (name == "twin") cmd_twin(c, stage);
    stage.commit();
    log.info("done in " + csv::format(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) +
             " s");
    return 0;
  } catch (const UsageError& e) {
    log.error(e.what());
    error_line(name, "usage", e.what());
    return 2;
  } catch (const study::ConfigError& e) {
    log.error(e.what());
    error_line(name, "config", e.what());
    return 1;
  } catch (const std::exception& e) {
    log.error(e.what());
    error_line(name, "runtime", e.what());
    return 1;
  }
}
