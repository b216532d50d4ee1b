#include "doctest.h"
#include "oracles.hpp"
#include "test_support.hpp"

#include "hydrocal/assim.hpp"
#include "hydrocal/csv.hpp"

#include <cmath>
#include <random>

using namespace hydrocal;
using namespace hydrocal::assim;

namespace {

Problem scalar_problem() {
  Problem p;
  p.x0 = Eigen::VectorXd::Zero(1);
  p.b_diag = Eigen::VectorXd::Ones(1);
  p.y = Eigen::VectorXd::Ones(1);
  p.r_diag = Eigen::VectorXd::Ones(1);
  p.bounds = {{-10.0, 10.0}};
  p.evaluator = [](const Eigen::VectorXd& x) { return x; };
  return p;
}

void check_trace(const Problem& p, const MinimizeResult& r) {
  REQUIRE(!r.trace.empty());
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    const auto& t = r.trace[i];
    CHECK(t.iteration == static_cast<int>(i));
    CHECK(std::abs(t.j - (t.jb + t.jobs)) <= 1e-12 * std::max(1.0, std::abs(t.j)));
    CHECK(t.j <= prev);
    prev = t.j;
    for (Eigen::Index k = 0; k < t.x.size(); ++k) {
      CHECK(t.x(k) >= p.bounds[static_cast<std::size_t>(k)].first);
      CHECK(t.x(k) <= p.bounds[static_cast<std::size_t>(k)].second);
    }
    if (i) CHECK(t.evaluations >= r.trace[i - 1].evaluations);
  }
  CHECK(r.trace.back().j == r.at_map.j);
  CHECK(r.trace.back().x == r.x_map);
}

}  // namespace

TEST_CASE("covariance rules") {
  const auto c = build_covariances(Eigen::Vector2d(2, 4), Eigen::Vector2d(1, 1));
  CHECK(c.r_diag(0) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(c.r_diag(1) == doctest::Approx(0.4).epsilon(1e-15));

  Eigen::VectorXd x0(5);
  x0 << 73.76, 83.62, 83.62, 0.9729, 0.8611;
  const auto b = build_covariances(Eigen::VectorXd::Ones(1), x0);
  for (Eigen::Index k = 0; k < 5; ++k) CHECK(b.b_diag(k) == 10.0 * x0(k));

  const auto z = build_covariances(Eigen::Vector3d(0.0, -3.0, 1e-9), Eigen::Vector2d(0.0, -1.0));
  CHECK(z.r_diag(0) == 1e-6);
  CHECK(z.r_diag(1) == doctest::Approx(0.3));
  CHECK(z.r_diag(2) == 1e-6);
  CHECK(z.b_diag(0) == 1e-6);
  CHECK(z.b_diag(1) == 10.0);
}

TEST_CASE("cost function") {
  auto p = scalar_problem();
  auto c = cost(p, Eigen::VectorXd::Zero(1));
  CHECK(c.j == 0.5);
  CHECK(c.jb == 0.0);
  CHECK(c.jobs == 0.5);
  c = cost(p, Eigen::VectorXd::Constant(1, 0.5));
  CHECK(c.j == 0.25);
  CHECK(c.jb == 0.125);
  CHECK(c.jobs == 0.125);

  p.y = Eigen::VectorXd::Zero(1);
  CHECK(cost(p, p.x0).j == 0.0);

  CHECK_THROWS_AS(cost(p, Eigen::VectorXd::Constant(1, 11.0)), std::domain_error);
  p.evaluator = [](const Eigen::VectorXd&) -> Eigen::VectorXd { throw std::runtime_error("solver blew up"); };
  try {
    cost(p, Eigen::VectorXd::Constant(1, 2.5));
    FAIL("expected an evaluation error");
  } catch (const EvaluationError& e) {
    CHECK(e.x()(0) == 2.5);
    CHECK(std::string(e.what()).find("solver blew up") != std::string::npos);
  }

  p = scalar_problem();
  p.r_diag(0) = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = scalar_problem();
  p.x0(0) = 20.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("finite-difference gradients") {
  const Bounds box{{-5, 5}, {-5, 5}, {-5, 5}};
  const Eigen::Vector3d a(1.5, -2.0, 0.25);
  auto linear = [&](const Eigen::VectorXd& x) { return a.dot(x); };
  const auto g = fd_gradient(linear, Eigen::Vector3d(0.1, 0.2, 0.3), box);
  CHECK((g - a).cwiseAbs().maxCoeff() < 1e-9);

  auto square = [](const Eigen::VectorXd& x) { return x(0) * x(0); };
  const auto gc = fd_gradient(square, Eigen::VectorXd::Ones(1), {{-10, 10}},
                              {.scheme = DifferenceScheme::Central, .space = IncrementSpace::Raw});
  CHECK(std::abs(gc(0) - 2.0) < 1e-8);

  // quadratic: forward differences within 10 increments of the analytic gradient
  Eigen::Matrix3d Q;
  Q << 3, 1, 0, 1, 2, 0.5, 0, 0.5, 1;
  auto quad = [&](const Eigen::VectorXd& x) { return 0.5 * x.dot(Q * x); };
  const Eigen::Vector3d x(0.3, -1.1, 2.0);
  const auto gf = fd_gradient(quad, x, box, {.space = IncrementSpace::Raw});
  CHECK((gf - Q * x).cwiseAbs().maxCoeff() < 10 * 1e-4);
  const auto gu = fd_gradient(quad, x, box, {.workers = 3});
  CHECK((gu - Q * x).cwiseAbs().maxCoeff() < 10 * 1e-4 * 10.0);

  // at the upper bound the perturbation flips
  const auto gb = fd_gradient(linear, Eigen::Vector3d(5, -5, 5), box, {.scheme = DifferenceScheme::Central});
  CHECK((gb - a).cwiseAbs().maxCoeff() < 1e-9);

  auto p = scalar_problem();
  p.y = Eigen::VectorXd::Zero(1);
  CHECK(std::abs(fd_gradient(p, p.x0, {.scheme = DifferenceScheme::Central})(0)) < 1e-8);
  CHECK(std::abs(fd_gradient(p, p.x0)(0)) < 1e-2);

  auto failing = [](const Eigen::VectorXd& x) {
    if (x(1) != 0.0) throw std::runtime_error("bad point");
    return x(0);
  };
  try {
    fd_gradient(failing, Eigen::Vector2d(0, 0), {{-1, 1}, {-1, 1}});
    FAIL("expected an evaluation error");
  } catch (const EvaluationError& e) {
    CHECK(e.component() == 1);
  }
}

TEST_CASE("bound-constrained bfgs") {
  Objective parabola{[](const Eigen::VectorXd& x) { return (x(0) - 3) * (x(0) - 3); },
                     [](const Eigen::VectorXd& x, double) { return Eigen::VectorXd::Constant(1, 2 * (x(0) - 3)); }};
  auto r = bfgs_minimize(parabola, Eigen::VectorXd::Zero(1), {{0, 10}});
  CHECK(r.status == Status::Converged);
  CHECK(std::abs(r.x(0) - 3) < 1e-6);
  r = bfgs_minimize(parabola, Eigen::VectorXd::Zero(1), {{0, 2}});
  CHECK(r.status == Status::Converged);
  CHECK(r.x(0) == 2.0);
  CHECK(r.iterates.back().active == std::vector<int>{0});

  Objective rosen{[](const Eigen::VectorXd& x) {
                    return 100 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1 - x(0), 2);
                  },
                  [](const Eigen::VectorXd& x, double) {
                    Eigen::VectorXd g(2);
                    g(0) = -400 * x(0) * (x(1) - x(0) * x(0)) - 2 * (1 - x(0));
                    g(1) = 200 * (x(1) - x(0) * x(0));
                    return g;
                  }};
  r = bfgs_minimize(rosen, Eigen::Vector2d(-1.2, 1), {{-5, 5}, {-5, 5}}, {.grad_tol = 1e-8});
  MESSAGE("rosenbrock iterations " << r.iterations);
  CHECK(r.status == Status::Converged);
  CHECK(r.iterations < 200);
  CHECK((r.x - Eigen::Vector2d(1, 1)).cwiseAbs().maxCoeff() < 1e-4);
  for (std::size_t i = 1; i < r.iterates.size(); ++i) CHECK(r.iterates[i].f <= r.iterates[i - 1].f);

  // bound-active Rosenbrock
  r = bfgs_minimize(rosen, Eigen::Vector2d(-1.2, 1), {{-5, 0.5}, {-5, 5}});
  CHECK(r.x(0) == 0.5);
  CHECK(std::abs(r.x(1) - 0.25) < 1e-5);

  auto it = bfgs_minimize(rosen, Eigen::Vector2d(-1.2, 1), {{-5, 5}, {-5, 5}}, {.max_iter = 3});
  CHECK(it.status == Status::MaxIterations);
  CHECK(it.iterations == 3);
}

TEST_CASE("linear-gaussian posterior") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const int q = 4, m = 9;
    Eigen::MatrixXd A(m, q);
    for (auto& v : A.reshaped()) v = n01(rng);
    Eigen::VectorXd b(m), x0(q), y(m);
    for (auto& v : b) v = n01(rng);
    for (auto& v : x0) v = 2.0 + n01(rng);
    for (auto& v : y) v = 3.0 + n01(rng);
    Problem p;
    p.x0 = x0;
    const auto cov = build_covariances(y, x0);
    p.b_diag = cov.b_diag;
    p.r_diag = cov.r_diag;
    p.y = y;
    p.bounds.assign(q, {-50.0, 50.0});
    p.evaluator = [A, b](const Eigen::VectorXd& x) { return Eigen::VectorXd(A * x + b); };
    const auto r = minimize(p, {.bfgs = {.grad_tol = 1e-6}, .gradient = {.scheme = DifferenceScheme::Central}});
    const auto exact = oracle::gaussian_posterior_mean(A, b, x0, p.b_diag, y, p.r_diag);
    // near the optimum J can no longer resolve the decrease, so a collapsed step also ends the search
    CHECK((r.status == Status::Converged || r.status == Status::StepCollapse));
    CHECK(r.iterations < 100);
    CHECK((r.x_map - exact).cwiseAbs().maxCoeff() < 1e-6);
    check_trace(p, r);
  }
}

TEST_CASE("minimisation trace with forward differences") {
  Problem p;
  p.x0 = Eigen::Vector2d(1.0, 0.5);
  p.b_diag = Eigen::Vector2d(10.0, 10.0);
  p.y = Eigen::Vector3d(2.0, 0.5, 1.5);
  p.r_diag = Eigen::Vector3d(0.01, 0.01, 0.01);
  p.bounds = {{0.0, 3.0}, {0.0, 0.8}};
  p.evaluator = [](const Eigen::VectorXd& x) {
    return Eigen::Vector3d(x(0) * x(1) + 1.0, std::sin(x(0)) * 0.5, x(1) * x(1) + x(0));
  };
  const auto r = minimize(p, {.gradient = {.workers = 2}});
  check_trace(p, r);
  CHECK(r.evaluations >= r.trace.back().evaluations);
  CHECK(r.iterations < 100);
}

TEST_CASE("observation files and matching") {
  const auto dir = hydrocal_test::scratch_dir("assim_obs");
  hydrocal_test::write_text(dir / "obs.csv", "station,time_s,value\nG1,600,1.5\n2,1200,-0.25\n");
  const auto obs = read_observations(dir / "obs.csv");
  REQUIRE(obs.size() == 2);
  CHECK(obs[1].station == "G2");
  write_observations(dir / "copy.csv", obs);
  const auto back = read_observations(dir / "copy.csv");
  CHECK(back[0].value == 1.5);
  CHECK(back[1].time == 1200.0);

  swe::GaugeRecord rec;
  rec.times = {600, 1200, 1800};
  rec.series = {{1, 2, 3}, {4, 5, 6}};
  auto idx = match_observations({{"G1", 1190.0, 0}, {"G2", 1800.0, 0}}, rec, 600);
  CHECK(idx[0].gauge == 0);
  CHECK(idx[0].record == 1);
  CHECK(idx[1].record == 2);
  CHECK_THROWS_AS(match_observations({{"G1", 2200.0, 0}}, rec, 600), std::invalid_argument);
  CHECK_THROWS_AS(match_observations({{"G3", 600.0, 0}}, rec, 600), std::invalid_argument);
  CHECK_THROWS_AS(match_observations({{"G1", 600.0, 0}, {"G1", 610.0, 0}}, rec, 600), std::invalid_argument);
  CHECK_THROWS_AS(station_index("X"), std::invalid_argument);
}

TEST_CASE("calibration through the simulation api") {
  const auto dir = hydrocal_test::scratch_dir("assim_cal");
  const auto cas = hydrocal_test::write_case(dir, "", 480);
  sim::SimApi api;
  CalibrationSetup s;
  s.case_path = cas;
  s.bindings = {{"Ks1", "MODEL.CHESTR", 0}, {"Ks2", "MODEL.CHESTR", 1}, {"alpha", "MODEL.TIDALRANGE", {}}};
  s.nominal = {30.0, 50.0, 1.0};
  s.free = {0, 2};
  s.bounds = {{10.0, 80.0}, {0.8, 1.2}};
  s.x0 = {30.0, 1.0};

  const auto truth = sim::run_workflow(api, cas, s.bindings, s.nominal);
  for (std::size_t g = 0; g < truth.series.size(); ++g)
    for (std::size_t r = 0; r < truth.times.size(); r += 2)
      s.observations.push_back({station_name(g), truth.times[r], truth.series[g][r]});

  SUBCASE("start at the truth") {
    const auto rep = calibrate(api, s);
    CHECK(rep.result.iterations <= 2);
    CHECK(rep.result.at_map.j < 1e-6);
    CHECK(std::abs(rep.x_map(0) - 30.0) < 0.05 * 70);
    CHECK(rep.series.size() == 3);
    CHECK(api.live_instances() == 0);
  }

  SUBCASE("recover a shifted start") {
    s.x0 = {55.0, 1.1};
    const auto rep = calibrate(api, s);
    MESSAGE("x_map " << rep.x_map.transpose() << " after " << rep.result.iterations << " iterations, "
                     << to_string(rep.result.status));
    CHECK(rep.result.trace.back().j < rep.result.trace.front().j);
    CHECK(std::abs(rep.x_map(1) - 1.0) < 0.05 * 0.4);
    check_trace(Problem{.x0 = rep.x0, .b_diag = rep.b_diag, .y = Eigen::VectorXd::Zero(1), .r_diag = rep.r_diag,
                        .bounds = s.bounds},
                rep.result);

    write_report_json(dir / "report.json", rep);
    write_trace_csv(dir / "trace.csv", rep.names, rep.result.trace);
    const auto t = csv::read(dir / "trace.csv");
    CHECK(t.header.back() == "alpha");
    CHECK(t.rows.size() == rep.result.trace.size());
    CHECK(hydrocal_test::read_text(dir / "report.json").find("\"x_map\"") != std::string::npos);
  }

  SUBCASE("observations off the record grid") {
    s.observations.push_back({"G1", truth.times[1] + 400.0, 0.0});
    CHECK_THROWS_AS(calibrate(api, s), std::invalid_argument);
    CHECK(api.live_instances() == 0);
  }
}
