#include "doctest.h"
#include "test_support.hpp"

#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <map>

using hydrocal_test::read_text;
using hydrocal_test::scratch_dir;
using hydrocal_test::write_study;
using hydrocal_test::write_text;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

/// Runs the CLI with @p args from @p dir; the log goes next to the outputs.
Run cli(const fs::path& dir, const std::string& args, const std::string& env = "") {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = "cd '" + dir.string() + "' && HYDROCAL_LOG='" + (dir / "cli.log").string() + "' " + env +
                          " '" HYDROCAL_CLI "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text(out);
  r.err = read_text(err);
  return r;
}

/// Last stderr line as JSON.
nlohmann::json error_json(const Run& r) {
  auto s = r.err;
  while (!s.empty() && s.back() == '\n') s.pop_back();
  return nlohmann::json::parse(s.substr(s.rfind('\n') + 1));
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_text(e.path());
  return files;
}

const char* kStudy =
    "gauges: [G1, G3]\n"
    "gsa: {repetitions: 3, convergence_sizes: [8, 16]}\n"
    "calibration: {count: 2, x0: {Ks1: 40, Ks2: 44, gamma: 0.1}, max_iterations: 20}\n"
    "twin: {x_true: [30, 50, 0.2]}\n";

}  // namespace

TEST_CASE("version and usage errors") {
  const auto dir = scratch_dir("cli_usage");
  write_study(dir, kStudy);

  auto r = cli(dir, "--version");
  CHECK(r.code == 0);
  CHECK(r.out.rfind("hydrocal 1.0.0", 0) == 0);

  r = cli(dir, "");
  CHECK(r.code == 2);
  CHECK(error_json(r)["kind"] == "usage");

  r = cli(dir, "frobnicate --config study.yaml --out o");
  CHECK(r.code == 2);
  CHECK(error_json(r)["status"] == "error");

  r = cli(dir, "doe --config study.yaml --out o --colour red");
  CHECK(r.code == 2);
  CHECK(error_json(r)["kind"] == "usage");
  CHECK(error_json(r)["subcommand"] == "doe");

  r = cli(dir, "doe --out o");
  CHECK(r.code == 2);
  CHECK(r.err.find("--config") != std::string::npos);

  r = cli(dir, "doe --config study.yaml --out o --workers 0");
  CHECK(r.code == 2);
  r = cli(dir, "doe --config study.yaml --out o", "HYDROCAL_WORKERS=many");
  CHECK(r.code == 2);
  CHECK(error_json(r)["message"].get<std::string>().find("HYDROCAL_WORKERS") != std::string::npos);
  CHECK(!fs::exists(dir / "o"));
}

TEST_CASE("configuration errors leave no outputs") {
  const auto dir = scratch_dir("cli_config");
  write_study(dir, kStudy);

  auto r = cli(dir, "doe --config absent.yaml --out o");
  CHECK(r.code == 1);
  CHECK(error_json(r)["kind"] == "config");
  CHECK(!fs::exists(dir / "o"));

  write_text(dir / "bad.yaml", read_text(dir / "study.yaml") + "colour: red\n");
  r = cli(dir, "twin --config bad.yaml --out o");
  CHECK(r.code == 1);
  CHECK(error_json(r)["message"].get<std::string>().find("'colour'") != std::string::npos);
  CHECK(!fs::exists(dir / "o"));

  // A stage whose inputs are missing fails without touching the directory.
  fs::create_directories(dir / "o");
  r = cli(dir, "evaluate --config study.yaml --out o");
  CHECK(r.code == 1);
  CHECK(error_json(r)["kind"] == "runtime");
  CHECK(fs::is_empty(dir / "o"));

  const auto log = read_text(dir / "cli.log");
  CHECK(log.find(" ERROR doe ") != std::string::npos);
  CHECK(log.find(" ERROR evaluate ") != std::string::npos);
}

TEST_CASE("staged pipeline through the output directory") {
  const auto dir = scratch_dir("cli_pipeline");
  write_study(dir, kStudy);

  CHECK(cli(dir, "simulate --config study.yaml --out o").code == 0);
  const auto sim = read_text(dir / "o/simulation.csv");
  CHECK(sim.rfind("time_s,G1,G2,G3\n", 0) == 0);

  CHECK(cli(dir, "doe --config study.yaml --out o --seed 99").code == 0);
  const auto meta = nlohmann::json::parse(read_text(dir / "o/design.csv.meta.json"));
  CHECK(meta["seed"] == 99);
  CHECK(meta["tool"] == "hydrocal");
  CHECK(meta["subcommand"] == "doe");
  CHECK(meta["schema_version"] == 1);
  CHECK(meta.find("workers") == meta.end());

  CHECK(cli(dir, "evaluate --config study.yaml --out o").code == 0);
  const auto ledger = read_text(dir / "o/ledger.csv");
  CHECK(std::count(ledger.begin(), ledger.end(), '\n') == 17);
  CHECK(ledger.find("failed") == std::string::npos);
  for (const char* g : {"G1", "G2", "G3"}) CHECK(fs::exists(dir / "o" / ("snapshots_" + std::string(g) + ".csv")));

  CHECK(cli(dir, "rom-fit --config study.yaml --out o").code == 0);
  CHECK(fs::exists(dir / "o/rom_G1.json"));
  CHECK(fs::exists(dir / "o/rom_G3.json"));
  CHECK(!fs::exists(dir / "o/rom_G2.json"));
  CHECK(fs::exists(dir / "o/rom_summary.json"));

  CHECK(cli(dir, "rom-validate --config study.yaml --out o").code == 0);
  const auto val = nlohmann::json::parse(read_text(dir / "o/validation.json"));
  CHECK(val.dump().find("G1") != std::string::npos);
  CHECK(fs::exists(dir / "o/q2_G3.csv"));

  CHECK(cli(dir, "gsa --config study.yaml --out o").code == 0);
  const auto gsi = read_text(dir / "o/gsi_G1.csv");
  CHECK(gsi.find("Ks1") != std::string::npos);
  CHECK(gsi.find("gamma") != std::string::npos);
  const auto chord = nlohmann::json::parse(read_text(dir / "o/chord_G1.json"));
  CHECK(!chord.empty());
  CHECK(fs::exists(dir / "o/convergence_G3.csv"));
  const auto ranking = nlohmann::json::parse(read_text(dir / "o/ranking.json"));
  CHECK(ranking.dump().find("gamma") != std::string::npos);

  CHECK(cli(dir, "twin --config study.yaml --out t").code == 0);
  const auto report = nlohmann::json::parse(read_text(dir / "t/twin_report.json"));
  CHECK(report["calibration"]["parameters"].size() == 2);
  CHECK(fs::exists(dir / "t/observations.csv"));

  // Calibration against the twin's observations, seeded from the gsa ranking.
  auto text = read_text(dir / "study.yaml");
  text.replace(text.find("max_iterations: 20}"), 19, "max_iterations: 20, observations: t/observations.csv}");
  write_text(dir / "cal.yaml", text);
  const auto r = cli(dir, "calibrate --config cal.yaml --out o");
  CHECK(r.code == 0);
  const auto cal = nlohmann::json::parse(read_text(dir / "o/calibration_report.json"));
  CHECK(cal.dump().find("gamma") != std::string::npos);
  CHECK(fs::exists(dir / "o/calibration_trace.csv"));
  CHECK(fs::exists(dir / "o/calibration_trace.csv.meta.json"));

  for (const auto& e : fs::directory_iterator(dir / "o")) {
    const auto name = e.path().filename().string();
    CHECK(name != ".hydrocal-staging");
    // Design and snapshot files carry a `.csv.json` companion of their own.
    const bool companion = name.ends_with(".csv.json");
    if (!name.ends_with(".meta.json") && !companion) CHECK(fs::exists(e.path().string() + ".meta.json"));
  }
  const auto log = read_text(dir / "cli.log");
  for (const char* s : {"simulate", "doe", "evaluate", "rom-fit", "rom-validate", "gsa", "calibrate", "twin"})
    CHECK(log.find(std::string(" INFO ") + s + " start") != std::string::npos);
}

TEST_CASE("strict evaluation failure keeps the ledger, permissive mode carries on") {
  const auto dir = scratch_dir("cli_failure");
  write_study(dir, kStudy, "[-40, 60]");
  CHECK(cli(dir, "doe --config study.yaml --out o").code == 0);

  auto r = cli(dir, "evaluate --config study.yaml --out o");
  CHECK(r.code == 1);
  CHECK(error_json(r)["kind"] == "runtime");
  const auto ledger = read_text(dir / "o/ledger.csv");
  CHECK(ledger.find("failed") != std::string::npos);
  CHECK(!fs::exists(dir / "o/snapshots_G1.csv"));

  r = cli(dir, "evaluate --config study.yaml --out o --permissive");
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "o/snapshots_G1.csv"));
  CHECK(read_text(dir / "o/ledger.csv").find("failed") != std::string::npos);
  CHECK(cli(dir, "rom-fit --config study.yaml --out o").code == 0);
}

TEST_CASE("outputs are identical for 1, 2 and 8 workers") {
  const auto dir = scratch_dir("cli_workers");
  write_study(dir, kStudy);
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* w : {"1", "2", "8"}) {
    const std::string out = std::string("w") + w;
    for (const char* sub : {"doe", "evaluate", "rom-fit", "rom-validate", "gsa"})
      REQUIRE(cli(dir, std::string(sub) + " --config study.yaml --out " + out + " --workers " + w).code == 0);
    REQUIRE(cli(dir, "twin --config study.yaml --out " + out + "/twin", "HYDROCAL_WORKERS=" + std::string(w)).code ==
            0);
    runs.push_back(tree(dir / out));
  }
  CHECK(runs[0].size() > 30);
  for (std::size_t k = 1; k < runs.size(); ++k) {
    REQUIRE(runs[k].size() == runs[0].size());
    for (const auto& [name, bytes] : runs[0]) {
      INFO(name);
      CHECK(runs[k].at(name) == bytes);
    }
  }
}
