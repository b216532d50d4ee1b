#include "doctest.h"
#include "test_support.hpp"

#include "hydrocal/study.hpp"

#include <cstdlib>
#include <regex>
#include <set>

using namespace hydrocal;
using namespace hydrocal::study;
using hydrocal_test::read_text;
using hydrocal_test::scratch_dir;
using hydrocal_test::write_study;
using hydrocal_test::write_text;

namespace {

std::string error_of(const std::filesystem::path& dir, const std::string& yaml) {
  try {
    parse_config(yaml, dir);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

const char* kHead =
    "schema_version: 1\n"
    "case: channel.cas\n"
    "parameters:\n"
    "  - {name: Ks1, keyword: MODEL.CHESTR, zone: 0, bounds: [20, 60], nominal: 35}\n"
    "  - {name: gamma, keyword: MODEL.SEALEVEL, bounds: [-0.5, 0.5]}\n";

}  // namespace

TEST_CASE("fnv1a64 matches the published test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(fnv1a64("bar", fnv1a64("foo")) == fnv1a64("foobar"));
  CHECK(hex64(0xaf63dc4c8601ec8cULL) == "af63dc4c8601ec8c");
  CHECK(hex64(1) == "0000000000000001");
}

TEST_CASE("derived seeds are deterministic and distinct") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t seed : {0ULL, 1ULL, 20240601ULL}) {
    for (auto s : {Stream::Doe, Stream::Validation, Stream::Noise}) {
      CHECK(derive_seed(seed, s) == derive_seed(seed, s));
      seen.insert(derive_seed(seed, s));
    }
    for (std::uint64_t r = 1; r < 20; ++r) seen.insert(derive_seed(seed, Stream::Repetition, r));
  }
  CHECK(seen.size() == 3 * (3 + 19));
}

TEST_CASE("config parsing") {
  const auto dir = scratch_dir("study_config");
  const auto path = write_study(dir, "gauges: [G1, G3]\nworkers: 3\ncalibration: {count: 2, x0: {gamma: 0.1}}\n"
                                     "twin: {x_true: [30, 50, 0.2], covariance: observed}\n");
  const auto c = load_config(path);
  CHECK(c.hash == hex64(fnv1a64(read_text(path))));
  CHECK(c.seed == 7);
  CHECK(c.workers == 3);
  CHECK(c.case_path == (dir / "channel.cas").lexically_normal());
  REQUIRE(c.parameters.size() == 3);
  CHECK(c.names() == std::vector<std::string>{"Ks1", "Ks2", "gamma"});
  CHECK(c.parameters[0].zone == 0);
  CHECK(!c.parameters[2].zone);
  CHECK(c.nominal() == std::vector<double>{35, 45, 0});
  CHECK(c.gauges == std::vector<std::string>{"G1", "G3"});
  CHECK(analysed_gauges(c) == std::vector<std::size_t>{0, 2});
  CHECK(c.doe.n == 16);
  CHECK(c.doe.scheme == doe::Scheme::LhsOptimized);
  CHECK(c.rom.max_degree == 2);
  CHECK(c.calibration.count == 2);
  CHECK(c.calibration.x0.at("gamma") == 0.1);
  REQUIRE(c.twin);
  CHECK(c.twin->covariance == TwinSettings::Covariance::Observed);
  CHECK(c.observation_case() == c.case_path);
  CHECK(c.parameter_index("Ks2") == 1);
  CHECK_THROWS_AS(c.parameter_index("Ks9"), ConfigError);
}

TEST_CASE("config errors name the offending key") {
  const auto dir = scratch_dir("study_errors");
  hydrocal_test::write_case(dir);
  const std::string head = kHead;

  CHECK(error_of(dir, head).empty());
  CHECK(error_of(dir, head + "sed: 3\n").find("'sed'") != std::string::npos);
  CHECK(error_of(dir, head + "doe: {n: 8, shceme: lhs}\n").find("'doe.shceme'") != std::string::npos);
  CHECK(error_of(dir, head + "doe: {scheme: grid}\n").find("doe.scheme") != std::string::npos);
  CHECK(error_of(dir, head + "doe: {n: 0}\n").find("doe.n") != std::string::npos);
  CHECK(error_of(dir, head + "gauges: [G9]\n").find("G9") != std::string::npos);
  CHECK(error_of(dir, head + "gauges: [X1]\n").find("gauges") != std::string::npos);
  CHECK(error_of(dir, head + "calibration: {observations: nowhere.csv}\n").find("missing file") != std::string::npos);
  CHECK(error_of(dir, head + "calibration: {x0: [1, 2]}\n").find("calibration.x0") != std::string::npos);
  CHECK(error_of(dir, head + "calibration: {x0: {Ks1: 99}}\n").find("outside its bounds") != std::string::npos);
  CHECK(error_of(dir, head + "calibration: {x0: {Ks7: 1}}\n").find("Ks7") != std::string::npos);
  CHECK(error_of(dir, head + "calibration: {scheme: backward}\n").find("calibration.scheme") != std::string::npos);
  CHECK(error_of(dir, head + "twin: {x_true: [30]}\n").find("twin.x_true") != std::string::npos);
  CHECK(error_of(dir, head + "twin: {x_true: [30, 2]}\n").find("gamma") != std::string::npos);
  CHECK(error_of(dir, "schema_version: 2\ncase: channel.cas\nparameters: []\n").find("schema_version") !=
        std::string::npos);
  CHECK(error_of(dir, "schema_version: 1\nparameters: []\n").find("'case'") != std::string::npos);
  CHECK(error_of(dir, "schema_version: 1\ncase: none.cas\n").find("missing file") != std::string::npos);
  CHECK(error_of(dir, "schema_version: 1\ncase: channel.cas\nparameters: []\n").find("parameters") !=
        std::string::npos);
  CHECK(error_of(dir, "schema_version: [1\n").find("malformed") != std::string::npos);

  const std::string p = "schema_version: 1\ncase: channel.cas\nparameters:\n";
  CHECK(error_of(dir, p + "  - {name: a, keyword: MODEL.NOPE, bounds: [0, 1]}\n").find("MODEL.NOPE") !=
        std::string::npos);
  CHECK(error_of(dir, p + "  - {name: a, keyword: MODEL.CHESTR, zone: 4, bounds: [1, 2]}\n").find("binding") !=
        std::string::npos);
  CHECK(error_of(dir, p + "  - {name: a, keyword: MODEL.SEALEVEL, bounds: [1, 0]}\n").find("bounds") !=
        std::string::npos);
  CHECK(error_of(dir, p + "  - {name: a, keyword: MODEL.SEALEVEL, bounds: [0, 1], nominal: 2}\n").find("nominal") !=
        std::string::npos);
  CHECK(error_of(dir, p + "  - {name: a, keyword: MODEL.SEALEVEL, bounds: [0, 1]}\n"
                          "  - {name: a, keyword: MODEL.TIDALRANGE, bounds: [0, 1]}\n")
            .find("twice") != std::string::npos);
  CHECK(error_of(dir, p + "  - {name: a, keyword: MODEL.SEALEVEL, bounds: [0, 1], unit: m}\n")
            .find("'parameters[].unit'") != std::string::npos);

  CHECK_THROWS_AS(load_config(dir / "absent.yaml"), ConfigError);
}

TEST_CASE("designs are reproducible from the seed and respect the bounds") {
  const auto dir = scratch_dir("study_design");
  const auto c = load_config(write_study(dir));
  const auto a = make_design(c, 11);
  const auto b = make_design(c, 11);
  const auto other = make_design(c, 12);
  CHECK(a.scaled == b.scaled);
  CHECK(a.scaled != other.scaled);
  CHECK(a.rows() == 16);
  CHECK(make_design(c, 11, 5).rows() == 5);
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    CHECK(a.scaled.col(j).minCoeff() >= c.parameters[static_cast<std::size_t>(j)].lo);
    CHECK(a.scaled.col(j).maxCoeff() <= c.parameters[static_cast<std::size_t>(j)].hi);
  }
}

TEST_CASE("parallel evaluation is independent of the worker count") {
  const auto dir = scratch_dir("study_eval");
  const auto c = load_config(write_study(dir));
  const auto design = make_design(c, 3, 6);
  const auto one = evaluate_doe(c, design, 1);
  const auto three = evaluate_doe(c, design, 3);
  REQUIRE(one.gauges.size() == 3);
  CHECK(one.rows == std::vector<int>{0, 1, 2, 3, 4, 5});
  CHECK(one.ledger.rows.size() == 6);
  CHECK(one.ledger.completed() == 6);
  CHECK(one.times == three.times);
  for (std::size_t g = 0; g < one.gauges.size(); ++g) CHECK(one.gauges[g] == three.gauges[g]);
  for (std::size_t i = 0; i < 6; ++i) CHECK(one.ledger.rows[i].checksum == three.ledger.rows[i].checksum);

  // Each row equals a standalone run of the same point.
  for (Eigen::Index r : {0, 5}) {
    const Eigen::VectorXd x = design.scaled.row(r).transpose();
    const auto rec = run_point(c, std::span<const double>(x.data(), 3));
    for (std::size_t g = 0; g < rec.series.size(); ++g)
      for (std::size_t t = 0; t < rec.times.size(); ++t)
        CHECK(one.gauges[g](r, static_cast<Eigen::Index>(t)) == rec.series[g][t]);
  }
  // Different points give different records.
  CHECK(one.ledger.rows[0].checksum != one.ledger.rows[1].checksum);
}

TEST_CASE("strict and permissive failure handling") {
  const auto dir = scratch_dir("study_fail");
  // Negative Strickler coefficients are rejected by the model.
  const auto c = load_config(write_study(dir, "", "[-40, 60]"));
  const auto design = make_design(c, 5, 10);
  std::vector<int> good;
  for (Eigen::Index r = 0; r < design.rows(); ++r)
    if (design.scaled(r, 0) > 0.0) good.push_back(static_cast<int>(r));
  REQUIRE(good.size() > 0);
  REQUIRE(good.size() < 10);

  try {
    evaluate_doe(c, design, 2);
    FAIL("strict evaluation should throw");
  } catch (const EvaluationFailed& e) {
    CHECK(e.ledger().rows.size() == 10);
    CHECK(e.ledger().completed() == good.size());
    CHECK(std::string(e.what()).find("first failure at row") != std::string::npos);
  }

  const auto ev = evaluate_doe(c, design, 2, FailureMode::Permissive);
  CHECK(ev.rows == good);
  CHECK(ev.gauges[0].rows() == static_cast<Eigen::Index>(good.size()));
  for (const auto& row : ev.ledger.rows) {
    CHECK(row.ok == (design.scaled(row.row, 0) > 0.0));
    if (!row.ok) CHECK(!row.message.empty());
  }
  const auto sub = subset_rows(design, ev.rows);
  CHECK(sub.rows() == static_cast<Eigen::Index>(good.size()));
  CHECK(sub.scaled.row(0) == design.scaled.row(good[0]));

  const auto csv = dir / "ledger.csv";
  write_ledger_csv(csv, ev.ledger);
  const auto text = read_text(csv);
  CHECK(text.rfind("row,status,checksum,message\n", 0) == 0);
  CHECK(text.find("failed") != std::string::npos);
  CHECK(text.find(hex64(ev.ledger.rows[static_cast<std::size_t>(good[0])].checksum)) != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 11);
}

TEST_CASE("staging commits atomically and cleans up after failures") {
  const auto root = scratch_dir("study_staging");
  const ArtifactMeta meta{"doe", "00000000deadbeef", 42};

  SUBCASE("uncommitted output leaves nothing behind") {
    const auto out = root / "fresh";
    {
      Staging s(out);
      write_text(s.artifact("design.csv", meta), "x\n");
      CHECK(!std::filesystem::exists(out / "design.csv"));
    }
    CHECK(!std::filesystem::exists(out));
  }
  SUBCASE("existing files survive a failed run") {
    const auto out = root / "existing";
    std::filesystem::create_directories(out);
    write_text(out / "design.csv", "old\n");
    {
      Staging s(out);
      write_text(s.artifact("design.csv", meta), "new\n");
    }
    CHECK(read_text(out / "design.csv") == "old\n");
    CHECK(!std::filesystem::exists(out / ".hydrocal-staging"));
  }
  SUBCASE("commit moves artifacts and sidecars into place") {
    const auto out = root / "commit";
    {
      Staging s(out);
      write_text(s.artifact("design.csv", meta), "new\n");
      s.commit();
    }
    CHECK(read_text(out / "design.csv") == "new\n");
    const auto sidecar = read_text(out / "design.csv.meta.json");
    CHECK(sidecar.find("\"artifact\": \"design.csv\"") != std::string::npos);
    CHECK(sidecar.find("\"config_hash\": \"00000000deadbeef\"") != std::string::npos);
    CHECK(sidecar.find("\"seed\": 42") != std::string::npos);
    CHECK(sidecar.find("\"schema_version\": 1") != std::string::npos);
    CHECK(sidecar.find("\"subcommand\": \"doe\"") != std::string::npos);
    CHECK(sidecar.find(std::string("\"version\": \"") + version() + "\"") != std::string::npos);
    CHECK(!std::filesystem::exists(out / ".hydrocal-staging"));
    CHECK_THROWS(Staging(out / "design.csv"));
  }
  CHECK(station_csv_name("gsi", "G2") == "gsi_G2.csv");
  CHECK(station_csv_name("chord", "G2", ".json") == "chord_G2.json");
}

TEST_CASE("ranking by total index") {
  gsa::GeneralizedIndices a, b;
  a.total = Eigen::Vector3d(0.1, 0.5, 0.3);
  b.total = Eigen::Vector3d(0.3, 0.1, 0.4);
  const std::vector<std::string> names{"x", "y", "z"};
  CHECK(rank_by_total(names, {a, b}) == std::vector<std::string>{"z", "y", "x"});
  CHECK(rank_by_total(names, {a}) == std::vector<std::string>{"y", "z", "x"});
  // Ties keep the declaration order.
  a.total = Eigen::Vector3d(0.2, 0.2, 0.2);
  CHECK(rank_by_total(names, {a}) == names);
  CHECK_THROWS(rank_by_total(names, {}));

  const auto dir = scratch_dir("study_rank");
  auto c = load_config(write_study(dir));
  c.calibration.count = 2;
  CHECK(calibration_parameters(c, {"gamma", "Ks2", "Ks1"}) == std::vector<std::string>{"gamma", "Ks2"});
  c.calibration.parameters = {"Ks1"};
  CHECK(calibration_parameters(c, {"gamma", "Ks2", "Ks1"}) == std::vector<std::string>{"Ks1"});
  c.calibration.parameters.clear();
  c.calibration.count = 4;
  CHECK_THROWS_AS(calibration_parameters(c, {"gamma", "Ks2", "Ks1"}), ConfigError);
}

TEST_CASE("synthetic observations") {
  const auto dir = scratch_dir("study_obs");
  const auto c = load_config(write_study(dir));
  const std::vector<double> x{30, 50, 0.2};
  const auto rec = run_point(c, x);
  std::vector<double> var;
  const auto clean = synthesize_observations(c, x, 9, false, &var);
  REQUIRE(clean.size() == rec.series.size() * rec.times.size());
  REQUIRE(var.size() == clean.size());
  std::size_t k = 0;
  for (std::size_t g = 0; g < rec.series.size(); ++g)
    for (std::size_t t = 0; t < rec.times.size(); ++t, ++k) {
      CHECK(clean[k].station == "G" + std::to_string(g + 1));
      CHECK(clean[k].time == rec.times[t]);
      CHECK(clean[k].value == rec.series[g][t]);
      CHECK(var[k] == std::max(0.1 * std::abs(rec.series[g][t]), 1e-6));
    }

  const auto noisy = synthesize_observations(c, x, 9);
  const auto again = synthesize_observations(c, x, 9);
  const auto other = synthesize_observations(c, x, 10);
  double z2 = 0.0;
  bool differs = false;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    CHECK(noisy[i].value == again[i].value);
    differs = differs || noisy[i].value != other[i].value;
    const double z = (noisy[i].value - clean[i].value) / std::sqrt(var[i]);
    z2 += z * z;
  }
  CHECK(differs);
  // Standardised residuals have unit variance (chi-square, 5 sigma band).
  const double n = static_cast<double>(noisy.size());
  CHECK(std::abs(z2 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
}

TEST_CASE("noise-free twin recovers the true parameters") {
  const auto dir = scratch_dir("study_twin");
  write_study(dir);
  auto cas = read_text(dir / "channel.cas");
  cas.replace(cas.find("RECORD_INTERVAL = 600"), 21, "RECORD_INTERVAL = 60");
  write_text(dir / "observe.cas", cas);
  const auto c = load_config(write_study(dir, "calibration: {count: 2, x0: {Ks1: 40, Ks2: 44, gamma: 0.1}, "
                                              "case: observe.cas}\n"
                                              "twin: {x_true: [30, 50, 0.2]}\n"));
  const auto r = twin_experiment(c, c.seed, 1, false);
  CHECK(r.ranking.size() == 3);
  CHECK(r.calibrated.size() == 2);
  CHECK(r.analyses.size() == 3);
  CHECK(r.validation.rows() == 8);
  CHECK(r.evaluation.ledger.completed() == 16);
  for (const auto& a : r.analyses) CHECK(a.q2.size() == static_cast<Eigen::Index>(r.evaluation.times.size()));
  CHECK(r.calibrated == std::vector<std::string>{"gamma", "Ks2"});
  REQUIRE(r.recovery_error.size() == 2);
  CHECK(r.recovery_error[0] < 0.05);
  CHECK(r.recovery_error[1] < 0.05);
  CHECK(r.recovery_error[0] < 0.1 / 1.0);
  CHECK(r.recovery_error[1] < 6.0 / 40.0);
  const auto& m = r.calibration.result.at_map;
  CHECK(std::abs(m.j - (m.jb + m.jobs)) <= 1e-12 * std::max(1.0, m.j));
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& t : r.calibration.result.trace) {
    CHECK(t.j <= prev);
    prev = t.j;
  }
}

TEST_CASE("twin with the start at the truth stays there") {
  const auto dir = scratch_dir("study_twin_exact");
  const auto c = load_config(write_study(dir, "calibration: {parameters: [Ks2, gamma]}\n"
                                              "twin: {x_true: [30, 50, 0.2]}\n"));
  CHECK(c.calibration.x0.empty());
  const auto obs = synthesize_observations(c, c.twin->x_true, 1, false);
  const auto rep = run_calibration(c, {"Ks2", "gamma"}, c.twin->x_true, obs, 1);
  CHECK(rep.x0(0) == 50.0);
  CHECK(rep.x0(1) == 0.2);
  CHECK(std::abs(rep.x_map(0) - 50.0) / 40.0 < 1e-6);
  CHECK(std::abs(rep.x_map(1) - 0.2) < 1e-6);
  CHECK(rep.result.at_map.jobs < 1e-12);
}

TEST_CASE("log lines carry a UTC timestamp, level and subcommand") {
  const auto dir = scratch_dir("study_log");
  const auto file = dir / "run.log";
  ::setenv("HYDROCAL_LOG", file.c_str(), 1);
  CHECK(Log::location() == file);
  Log log("gsa");
  log.info("first");
  log.warn("two\nlines");
  ::unsetenv("HYDROCAL_LOG");
  const auto text = read_text(file);
  const std::regex line(R"(\d{4}-\d\d-\d\dT\d\d:\d\d:\d\d\.\d{3}Z (INFO|WARN) gsa [^\n]*\n)");
  const std::regex all(R"((\d{4}-\d\d-\d\dT\d\d:\d\d:\d\d\.\d{3}Z (INFO|WARN) gsa [^\n]*\n){2})");
  CHECK(std::regex_match(text, all));
  CHECK(text.find("two lines") != std::string::npos);
}
