/// @file assim.hpp
/// @brief 3D-Var calibration with diagonal covariances, finite-difference
/// gradients and bound-constrained BFGS.
#pragma once

#include "hydrocal/sim_api.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hydrocal::assim {

using Bounds = std::vector<std::pair<double, double>>;

/// Maps a parameter vector to the predicted observation vector. Must be safe
/// to call from several threads at once when gradients run in parallel.
using Evaluator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Evaluator failure with the offending parameter vector attached.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, Eigen::VectorXd x, int component = -1)
      : std::runtime_error(what), x_(std::move(x)), component_(component) {}
  const Eigen::VectorXd& x() const { return x_; }
  /// Gradient component being perturbed, -1 for the base point.
  int component() const { return component_; }

 private:
  Eigen::VectorXd x_;
  int component_;
};

struct Covariances {
  Eigen::VectorXd r_diag;
  Eigen::VectorXd b_diag;
};

/// R = max(0.1 |Y|, floor), B = max(10 |X0|, floor).
Covariances build_covariances(const Eigen::VectorXd& y, const Eigen::VectorXd& x0, double floor = 1e-6);

struct Problem {
  Eigen::VectorXd x0;
  Eigen::VectorXd b_diag;
  Eigen::VectorXd y;
  Eigen::VectorXd r_diag;
  Bounds bounds;
  Evaluator evaluator;
  std::vector<std::string> names;  ///< optional, for messages and reports

  /// Throws std::invalid_argument when a variance is not positive, sizes
  /// disagree, X0 lies outside the box or there are no observations.
  void validate() const;
  std::size_t size() const { return static_cast<std::size_t>(x0.size()); }
};

struct CostValue {
  double j = 0.0;
  double jb = 0.0;
  double jobs = 0.0;
  Eigen::VectorXd model;  ///< G(X)
};

/// J_b = 1/2 (X-X0)^T B^-1 (X-X0), J_obs = 1/2 (Y-G(X))^T R^-1 (Y-G(X)).
/// Throws std::domain_error outside the box and EvaluationError when G fails.
CostValue cost(const Problem& problem, const Eigen::VectorXd& x);

enum class DifferenceScheme { Forward, Central };
enum class IncrementSpace { Unit, Raw };

struct GradientOptions {
  double increment = 1e-4;
  DifferenceScheme scheme = DifferenceScheme::Forward;
  IncrementSpace space = IncrementSpace::Unit;
  int workers = 1;
};

/// Finite-difference gradient dJ/dX in physical units. A perturbation that
/// would leave the box flips to the other side. @p at_x may carry J(x) to
/// save one evaluation in forward mode.
Eigen::VectorXd fd_gradient(const Problem& problem, const Eigen::VectorXd& x, const GradientOptions& options = {},
                            const CostValue* at_x = nullptr);

/// Generic finite differences of a scalar function on a box.
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                            const Bounds& bounds, const GradientOptions& options = {},
                            std::optional<double> fx = std::nullopt);

// ---------------------------------------------------------------------------
// Bound-constrained BFGS
// ---------------------------------------------------------------------------

enum class Status { Converged, MaxIterations, StepCollapse, LineSearchFailed };
std::string to_string(Status s);

struct BfgsOptions {
  int max_iter = 200;
  double grad_tol = 1e-5;  ///< on the projected gradient, infinity norm
  double armijo = 1e-4;
  int max_backtracks = 40;
  double step_tol = 1e-12;
  /// Converged when an accepted step lowers f by less than this fraction of
  /// max(|f|, 1); 0 disables the test.
  double f_rel_tol = 0.0;
};

struct Objective {
  std::function<double(const Eigen::VectorXd&)> value;
  /// Gradient at x given f(x).
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> gradient;
};

struct BfgsIterate {
  int iteration = 0;
  Eigen::VectorXd x;
  double f = 0.0;
  double projected_gradient = 0.0;
  std::vector<int> active;  ///< components held at a bound
};

struct BfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  Status status = Status::MaxIterations;
  std::vector<BfgsIterate> iterates;  ///< starting point then every accepted step
};

/// Projected quasi-Newton method: BFGS direction on the free variables,
/// projection onto the box and Armijo backtracking along the projected path.
BfgsResult bfgs_minimize(const Objective& objective, const Eigen::VectorXd& x0, const Bounds& bounds,
                         const BfgsOptions& options = {});

// ---------------------------------------------------------------------------
// 3D-Var
// ---------------------------------------------------------------------------

struct TraceRecord {
  int iteration = 0;
  Eigen::VectorXd x;
  double j = 0.0, jb = 0.0, jobs = 0.0;
  double gradient_norm = 0.0;  ///< projected gradient in unit-scaled parameters
  std::vector<int> active;
  long evaluations = 0;  ///< cumulative evaluator calls
};

struct MinimizeResult {
  Eigen::VectorXd x_map;
  CostValue at_map;
  std::vector<TraceRecord> trace;
  Status status = Status::MaxIterations;
  int iterations = 0;
  long evaluations = 0;
};

struct MinimizeOptions {
  BfgsOptions bfgs;
  GradientOptions gradient;
};

/// Minimises J over the box. The optimiser runs on unit-scaled parameters.
MinimizeResult minimize(const Problem& problem, const MinimizeOptions& options = {});

// ---------------------------------------------------------------------------
// Model calibration
// ---------------------------------------------------------------------------

struct Observation {
  std::string station;  ///< "G<k>", 1-based position in the case GAUGES list
  double time = 0.0;
  double value = 0.0;
};

/// CSV `station,time_s,value`; a bare integer station k means "G<k>".
std::vector<Observation> read_observations(const std::filesystem::path& path);
void write_observations(const std::filesystem::path& path, const std::vector<Observation>& obs);
std::string station_name(std::size_t gauge);
/// Gauge position of a station label, throws std::invalid_argument.
std::size_t station_index(const std::string& station);

struct ObservationIndex {
  std::size_t gauge = 0;
  std::size_t record = 0;
};

/// Pairs each observation with the nearest record time. Throws
/// std::invalid_argument when the gap exceeds half the record interval, the
/// station is unknown or two observations land on one record.
std::vector<ObservationIndex> match_observations(const std::vector<Observation>& obs, const swe::GaugeRecord& record,
                                                 double record_interval);

struct CalibrationSetup {
  std::filesystem::path case_path;
  std::vector<sim::ParameterBinding> bindings;  ///< every model parameter
  std::vector<double> nominal;                 ///< values for every binding
  std::vector<std::size_t> free;               ///< indices of the calibrated bindings
  Bounds bounds;                                ///< for the free parameters
  std::vector<double> x0;                       ///< prior mean of the free parameters
  std::vector<Observation> observations;
  /// Observation variances, one per observation. Empty: max(0.1 |Y|, 1e-6).
  std::vector<double> r_diag;
  MinimizeOptions options;
};

struct StationSeries {
  std::string station;
  std::vector<double> times;
  std::vector<double> observed;  ///< NaN where the record has no observation
  std::vector<double> before;    ///< model at X0
  std::vector<double> after;     ///< model at X_map
};

struct CalibrationReport {
  std::vector<std::string> names;
  Eigen::VectorXd x0;
  Eigen::VectorXd x_map;
  Eigen::VectorXd b_diag;
  Eigen::VectorXd r_diag;
  MinimizeResult result;
  std::vector<StationSeries> series;
};

/// Runs 3D-Var on the channel model through the simulation API.
CalibrationReport calibrate(sim::SimApi& api, const CalibrationSetup& setup);

void write_report_json(const std::filesystem::path& path, const CalibrationReport& report);
/// Columns iteration, J, J_b, J_obs, gradient_norm, evaluations, then one per parameter.
void write_trace_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                     const std::vector<TraceRecord>& trace);

}  // namespace hydrocal::assim
