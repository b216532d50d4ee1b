/// @file sim_api.hpp
/// @brief Instance-based control of the channel model.
///
/// An instance walks through a fixed lifecycle
///
///   Created -> CaseRead -> Allocated -> Initialized -> Running -> Finalized
///
/// and exposes its variables through string keywords of the form
/// "MODEL.NAME". Indexed variables take a 1-based cell index as `i`; unused
/// indices are 0. Every call returns a status instead of throwing; a failed
/// call leaves the instance exactly as it was.
///
/// Distinct instances may be driven from distinct threads. Calls on the same
/// instance are serialised internally.
#pragma once

#include "hydrocal/swe.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace hydrocal::sim {

enum class ErrorCode : int {
  Ok = 0,
  // steering file
  CaseFileMissing = 101,
  UnknownCaseKey = 102,
  CaseTypeMismatch = 103,
  RepeatedCaseKey = 104,
  MalformedCaseLine = 105,
  MissingCaseKey = 106,
  InvalidCaseValue = 107,
  DataFileError = 108,
  // lifecycle
  PhaseOrder = 201,
  StaleHandle = 202,
  UnknownHandle = 203,
  Inconsistent = 204,
  // variable access
  UnknownKeyword = 301,
  ReadOnlyKeyword = 302,
  IndexOutOfRange = 303,
  WrongValueKind = 304,
  NotYetAvailable = 305,
  InvalidValue = 306,
  // stepping
  StepLimit = 401,
  SolverStepSize = 402,
  SolverBlowup = 403,
  Internal = 900,
};

const char* to_string(ErrorCode code);

enum class Phase { Created, CaseRead, Allocated, Initialized, Running, Finalized };

const char* to_string(Phase phase);

struct ApiError {
  ErrorCode code = ErrorCode::Internal;
  std::string message;
  int instance_id = 0;
  std::optional<std::string> keyword;

  /// "E<code> <name>: <message>" on one line.
  std::string describe() const;
};

/// Outcome of a call without a payload.
class ApiStatus {
 public:
  ApiStatus() = default;
  ApiStatus(ApiError error) : error_(std::move(error)) {}  // NOLINT(google-explicit-constructor)

  bool ok() const { return !error_; }
  explicit operator bool() const { return ok(); }
  ErrorCode code() const { return error_ ? error_->code : ErrorCode::Ok; }
  const ApiError& error() const { return *error_; }

 private:
  std::optional<ApiError> error_;
};

/// Outcome of a call returning a value.
template <class T>
class ApiResult {
 public:
  ApiResult(T value) : v_(std::move(value)) {}         // NOLINT(google-explicit-constructor)
  ApiResult(ApiError error) : v_(std::move(error)) {}  // NOLINT(google-explicit-constructor)

  bool ok() const { return v_.index() == 0; }
  explicit operator bool() const { return ok(); }
  ErrorCode code() const { return ok() ? ErrorCode::Ok : error().code; }
  const T& value() const { return std::get<0>(v_); }
  const T& operator*() const { return value(); }
  const ApiError& error() const { return std::get<1>(v_); }

 private:
  std::variant<T, ApiError> v_;
};

// ---------------------------------------------------------------------------
// Variable registry
// ---------------------------------------------------------------------------

enum class ValueKind { Real, Integer, Boolean, String };
enum class Arity { Scalar, PerCell };
enum class Mutability { ReadOnly, ReadWrite };

using Value = std::variant<double, std::int64_t, bool, std::string>;

ValueKind kind_of(const Value& v);
const char* to_string(ValueKind kind);

struct VariableDescriptor {
  std::string keyword;
  ValueKind kind;
  Arity arity;
  Mutability mutability;
  Phase available_from;
  std::string description;
};

/// Every keyword known to the API, in a stable order.
std::span<const VariableDescriptor> registry();
const VariableDescriptor* find_variable(std::string_view keyword);

// ---------------------------------------------------------------------------
// Steering file
// ---------------------------------------------------------------------------

/// Settings read from a steering file. Paths are absolute once parsed.
struct CaseConfig {
  std::filesystem::path source;
  std::filesystem::path geometry_file;
  std::optional<std::filesystem::path> constituents_file;
  std::optional<std::filesystem::path> hydrograph_file;
  double dt = 0.0;
  std::int64_t ntimesteps = 0;
  double record_interval = 600.0;
  double spinup = 43200.0;
  std::vector<double> gauges;
  double sealevel = 0.0;
  double tidalrange = 1.0;
  double velocityrange = 1.0;
  double discharge = 0.0;
  double zref = 0.0;
  double cfl = 0.9;
  std::vector<double> strickler{40.0};
  swe::UpstreamBoundary upstream = swe::UpstreamBoundary::Discharge;
  std::optional<swe::DownstreamBoundary> downstream;

  /// Gauge-recording schedule implied by DT, SPINUP_S, RECORD_INTERVAL and
  /// NTIMESTEPS. Throws std::invalid_argument if they are not commensurate.
  swe::RecordSchedule schedule() const;
};

class CaseError : public std::runtime_error {
 public:
  CaseError(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

/// Parses a steering file. Throws CaseError.
CaseConfig parse_case_file(const std::filesystem::path& path);

/// Loads the data files a case refers to and assembles the model. Throws
/// CaseError.
swe::ChannelModel build_model(const CaseConfig& config);

// ---------------------------------------------------------------------------
// Instances
// ---------------------------------------------------------------------------

struct Instance;

class SimApi {
 public:
  SimApi();
  ~SimApi();
  SimApi(const SimApi&) = delete;
  SimApi& operator=(const SimApi&) = delete;

  int create_instance();
  ApiStatus read_case(int id, const std::filesystem::path& case_path);
  ApiStatus allocate_and_init(int id);
  ApiResult<Value> get_value(int id, std::string_view keyword, int i = 0, int j = 0, int k = 0) const;
  ApiStatus set_value(int id, std::string_view keyword, int i, int j, int k, const Value& value);
  ApiStatus set_value(int id, std::string_view keyword, const Value& value) {
    return set_value(id, keyword, 0, 0, 0, value);
  }
  ApiStatus run_timestep(int id);
  ApiStatus finalize(int id);
  ApiResult<Phase> phase(int id) const;

  ApiResult<double> get_double(int id, std::string_view keyword, int i = 0) const;
  ApiResult<std::int64_t> get_integer(int id, std::string_view keyword, int i = 0) const;

  /// Number of instances that have not been finalized.
  std::size_t live_instances() const;

 private:
  std::shared_ptr<Instance> lookup(int id, ApiError& err) const;

  mutable std::mutex mutex_;
  std::map<int, std::shared_ptr<Instance>> live_;
  int next_id_ = 1;
};

// ---------------------------------------------------------------------------
// Study workflow
// ---------------------------------------------------------------------------

/// Maps one uncertain parameter onto a keyword. With `zone` set, the value is
/// broadcast to every cell of that friction zone of a per-cell keyword.
struct ParameterBinding {
  std::string name;
  std::string keyword;
  std::optional<int> zone;
};

class WorkflowError : public std::runtime_error {
 public:
  explicit WorkflowError(ApiError error)
      : std::runtime_error(error.describe()), error_(std::move(error)) {}
  const ApiError& error() const { return error_; }

 private:
  ApiError error_;
};

/// Checks that each binding names a writable real keyword and that zones are
/// only used with per-cell keywords. Throws WorkflowError.
void validate_bindings(std::span<const ParameterBinding> bindings);

/// One full model run driven through the API: create, read the case,
/// initialise, apply x, step to NTIMESTEPS while recording the free surface
/// at the gauges, finalise. The instance is finalised on every exit path.
/// Throws WorkflowError.
swe::GaugeRecord run_workflow(SimApi& api, const std::filesystem::path& case_path,
                              std::span<const ParameterBinding> bindings, std::span<const double> x);

}  // namespace hydrocal::sim
