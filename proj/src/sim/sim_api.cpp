/// @file sim_api.cpp
/// @brief Instance lifecycle, keyword access and stepping.

#include "instance.hpp"

namespace hydrocal::sim {
namespace {

ApiError make_error(ErrorCode code, int id, std::string message, std::optional<std::string> keyword = {}) {
  return ApiError{code, std::move(message), id, std::move(keyword)};
}

ApiError phase_error(const Instance& s, const char* op) {
  return make_error(ErrorCode::PhaseOrder, s.id,
                    std::string(op) + " is not allowed in phase " + to_string(s.phase));
}

}  // namespace

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Ok: return "ok";
    case ErrorCode::CaseFileMissing: return "case-file-missing";
    case ErrorCode::UnknownCaseKey: return "unknown-case-key";
    case ErrorCode::CaseTypeMismatch: return "case-type-mismatch";
    case ErrorCode::RepeatedCaseKey: return "repeated-case-key";
    case ErrorCode::MalformedCaseLine: return "malformed-case-line";
    case ErrorCode::MissingCaseKey: return "missing-case-key";
    case ErrorCode::InvalidCaseValue: return "invalid-case-value";
    case ErrorCode::DataFileError: return "data-file-error";
    case ErrorCode::PhaseOrder: return "phase-order";
    case ErrorCode::StaleHandle: return "stale-handle";
    case ErrorCode::UnknownHandle: return "unknown-handle";
    case ErrorCode::Inconsistent: return "inconsistent-case";
    case ErrorCode::UnknownKeyword: return "unknown-keyword";
    case ErrorCode::ReadOnlyKeyword: return "read-only-keyword";
    case ErrorCode::IndexOutOfRange: return "index-out-of-range";
    case ErrorCode::WrongValueKind: return "wrong-value-kind";
    case ErrorCode::NotYetAvailable: return "not-yet-available";
    case ErrorCode::InvalidValue: return "invalid-value";
    case ErrorCode::StepLimit: return "step-limit";
    case ErrorCode::SolverStepSize: return "solver-step-size";
    case ErrorCode::SolverBlowup: return "solver-blowup";
    case ErrorCode::Internal: return "internal";
  }
  return "unknown";
}

const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::Created: return "Created";
    case Phase::CaseRead: return "CaseRead";
    case Phase::Allocated: return "Allocated";
    case Phase::Initialized: return "Initialized";
    case Phase::Running: return "Running";
    case Phase::Finalized: return "Finalized";
  }
  return "?";
}

std::string ApiError::describe() const {
  std::string s = "E" + std::to_string(static_cast<int>(code)) + " " + to_string(code);
  if (instance_id > 0) s += " [instance " + std::to_string(instance_id) + "]";
  if (keyword) s += " [" + *keyword + "]";
  return s + ": " + message;
}

SimApi::SimApi() = default;
SimApi::~SimApi() = default;

int SimApi::create_instance() {
  std::lock_guard lock(mutex_);
  auto inst = std::make_shared<Instance>();
  inst->id = next_id_++;
  live_.emplace(inst->id, inst);
  return inst->id;
}

std::shared_ptr<Instance> SimApi::lookup(int id, ApiError& err) const {
  std::lock_guard lock(mutex_);
  if (const auto it = live_.find(id); it != live_.end()) return it->second;
  if (id >= 1 && id < next_id_)
    err = make_error(ErrorCode::StaleHandle, id, "instance has been finalized");
  else
    err = make_error(ErrorCode::UnknownHandle, id, "no such instance");
  return nullptr;
}

std::size_t SimApi::live_instances() const {
  std::lock_guard lock(mutex_);
  return live_.size();
}

ApiResult<Phase> SimApi::phase(int id) const {
  ApiError err;
  const auto inst = lookup(id, err);
  if (!inst) return err;
  std::lock_guard lock(inst->mutex);
  return inst->phase;
}

ApiStatus SimApi::read_case(int id, const std::filesystem::path& case_path) {
  ApiError err;
  const auto inst = lookup(id, err);
  if (!inst) return err;
  std::lock_guard lock(inst->mutex);
  if (inst->phase != Phase::Created) return phase_error(*inst, "read_case");
  try {
    inst->config = parse_case_file(case_path);
  } catch (const CaseError& e) {
    return make_error(e.code(), id, e.what());
  }
  inst->phase = Phase::CaseRead;
  return {};
}

ApiStatus SimApi::allocate_and_init(int id) {
  ApiError err;
  const auto inst = lookup(id, err);
  if (!inst) return err;
  std::lock_guard lock(inst->mutex);
  if (inst->phase != Phase::CaseRead) return phase_error(*inst, "allocate_and_init");
  swe::ChannelModel model;
  try {
    model = build_model(inst->config);
  } catch (const CaseError& e) {
    return make_error(e.code(), id, e.what());
  }
  inst->model = std::move(model);
  inst->phase = Phase::Allocated;
  inst->state = swe::still_water(inst->model.geometry, inst->config.zref);
  inst->state.t = 0.0;
  inst->lt = 0;
  inst->boundary_dry = false;
  inst->phase = Phase::Initialized;
  return {};
}

namespace {

/// Resolves keyword, phase and indices. Returns the zero-based cell index.
std::variant<std::pair<const Accessor*, std::size_t>, ApiError> resolve(const Instance& s, std::string_view keyword,
                                                                      int i, int j, int k) {
  const auto* a = find_accessor(keyword);
  const std::string kw(keyword);
  if (!a) return make_error(ErrorCode::UnknownKeyword, s.id, "unknown keyword", kw);
  if (s.phase < a->desc.available_from)
    return make_error(ErrorCode::NotYetAvailable, s.id,
                      std::string("available from phase ") + to_string(a->desc.available_from) +
                          ", instance is in phase " + to_string(s.phase),
                      kw);
  if (j != 0 || k != 0) return make_error(ErrorCode::IndexOutOfRange, s.id, "indices j and k must be 0", kw);
  if (a->desc.arity == Arity::Scalar) {
    if (i != 0) return make_error(ErrorCode::IndexOutOfRange, s.id, "scalar keyword takes index 0", kw);
    return std::pair{a, std::size_t{0}};
  }
  const auto n = a->extent(s);
  if (i < 1 || static_cast<std::size_t>(i) > n)
    return make_error(ErrorCode::IndexOutOfRange, s.id,
                      "index " + std::to_string(i) + " outside 1.." + std::to_string(n), kw);
  return std::pair{a, static_cast<std::size_t>(i - 1)};
}

}  // namespace

ApiResult<Value> SimApi::get_value(int id, std::string_view keyword, int i, int j, int k) const {
  ApiError err;
  const auto inst = lookup(id, err);
  if (!inst) return err;
  std::lock_guard lock(inst->mutex);
  auto r = resolve(*inst, keyword, i, j, k);
  if (r.index() == 1) return std::get<1>(r);
  const auto [a, idx] = std::get<0>(r);
  return a->get(*inst, idx);
}

ApiResult<double> SimApi::get_double(int id, std::string_view keyword, int i) const {
  auto v = get_value(id, keyword, i);
  if (!v) return v.error();
  if (const auto* d = std::get_if<double>(&*v)) return *d;
  return make_error(ErrorCode::WrongValueKind, id,
                    std::string("keyword holds a ") + to_string(kind_of(*v)) + " value", std::string(keyword));
}

ApiResult<std::int64_t> SimApi::get_integer(int id, std::string_view keyword, int i) const {
  auto v = get_value(id, keyword, i);
  if (!v) return v.error();
  if (const auto* d = std::get_if<std::int64_t>(&*v)) return *d;
  return make_error(ErrorCode::WrongValueKind, id,
                    std::string("keyword holds a ") + to_string(kind_of(*v)) + " value", std::string(keyword));
}

ApiStatus SimApi::set_value(int id, std::string_view keyword, int i, int j, int k, const Value& value) {
  ApiError err;
  const auto inst = lookup(id, err);
  if (!inst) return err;
  std::lock_guard lock(inst->mutex);
  auto r = resolve(*inst, keyword, i, j, k);
  if (r.index() == 1) return std::get<1>(r);
  const auto [a, idx] = std::get<0>(r);
  const std::string kw(keyword);
  if (a->desc.mutability == Mutability::ReadOnly || !a->set)
    return make_error(ErrorCode::ReadOnlyKeyword, id, "keyword is read-only", kw);
  if (kind_of(value) != a->desc.kind)
    return make_error(ErrorCode::WrongValueKind, id,
                      std::string("expected a ") + to_string(a->desc.kind) + " value, got " +
                          to_string(kind_of(value)),
                      kw);
  try {
    a->set(*inst, idx, value);
  } catch (const InvalidValueError& e) {
    return make_error(ErrorCode::InvalidValue, id, e.what(), kw);
  }
  return {};
}

ApiStatus SimApi::run_timestep(int id) {
  ApiError err;
  const auto inst = lookup(id, err);
  if (!inst) return err;
  std::lock_guard lock(inst->mutex);
  if (inst->phase != Phase::Initialized && inst->phase != Phase::Running)
    return phase_error(*inst, "run_timestep");
  if (inst->lt >= inst->config.ntimesteps)
    return make_error(ErrorCode::StepLimit, id,
                      "all " + std::to_string(inst->config.ntimesteps) + " time steps have been taken");
  swe::StepReport report;
  try {
    swe::advance(inst->state, inst->model, inst->config.dt, &report);
  } catch (const swe::StepSizeError& e) {
    return make_error(ErrorCode::SolverStepSize, id, e.what());
  } catch (const swe::BlowupError& e) {
    return make_error(ErrorCode::SolverBlowup, id, e.what());
  } catch (const std::exception& e) {
    return make_error(ErrorCode::Internal, id, e.what());
  }
  ++inst->lt;
  inst->boundary_dry = report.boundary_drying;
  inst->phase = Phase::Running;
  return {};
}

ApiStatus SimApi::finalize(int id) {
  std::shared_ptr<Instance> inst;
  {
    std::lock_guard lock(mutex_);
    const auto it = live_.find(id);
    if (it == live_.end()) {
      if (id >= 1 && id < next_id_) return make_error(ErrorCode::StaleHandle, id, "instance has been finalized");
      return make_error(ErrorCode::UnknownHandle, id, "no such instance");
    }
    inst = it->second;
    live_.erase(it);
  }
  std::lock_guard lock(inst->mutex);
  inst->phase = Phase::Finalized;
  inst->model = {};
  inst->state = {};
  return {};
}

}  // namespace hydrocal::sim
