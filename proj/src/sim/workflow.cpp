/// @file workflow.cpp
/// @brief One study run driven through the instance API.

#include "hydrocal/sim_api.hpp"

namespace hydrocal::sim {
namespace {

template <class T>
T check(ApiResult<T> r) {
  if (!r) throw WorkflowError(r.error());
  return r.value();
}

void check(const ApiStatus& s) {
  if (!s) throw WorkflowError(s.error());
}

class InstanceGuard {
 public:
  InstanceGuard(SimApi& api) : api_(api), id_(api.create_instance()) {}
  ~InstanceGuard() { (void)api_.finalize(id_); }
  InstanceGuard(const InstanceGuard&) = delete;
  InstanceGuard& operator=(const InstanceGuard&) = delete;
  int id() const { return id_; }

 private:
  SimApi& api_;
  int id_;
};

}  // namespace

void validate_bindings(std::span<const ParameterBinding> bindings) {
  for (const auto& b : bindings) {
    const auto* d = find_variable(b.keyword);
    auto reject = [&](ErrorCode code, const std::string& msg) {
      throw WorkflowError(ApiError{code, "parameter " + b.name + ": " + msg, 0, b.keyword});
    };
    if (!d) reject(ErrorCode::UnknownKeyword, "unknown keyword");
    if (d->mutability != Mutability::ReadWrite) reject(ErrorCode::ReadOnlyKeyword, "keyword is read-only");
    if (d->kind != ValueKind::Real) reject(ErrorCode::WrongValueKind, "keyword is not real-valued");
    if (d->arity == Arity::PerCell && !b.zone) reject(ErrorCode::IndexOutOfRange, "per-cell keyword needs a zone");
    if (d->arity == Arity::Scalar && b.zone) reject(ErrorCode::IndexOutOfRange, "scalar keyword takes no zone");
    if (b.zone && *b.zone < 0) reject(ErrorCode::IndexOutOfRange, "zone must be non-negative");
  }
}

swe::GaugeRecord run_workflow(SimApi& api, const std::filesystem::path& case_path,
                              std::span<const ParameterBinding> bindings, std::span<const double> x) {
  if (x.size() != bindings.size())
    throw WorkflowError(ApiError{ErrorCode::InvalidValue,
                                 "got " + std::to_string(x.size()) + " parameter values for " +
                                     std::to_string(bindings.size()) + " bindings",
                                 0, std::nullopt});
  validate_bindings(bindings);

  InstanceGuard guard(api);
  const int id = guard.id();
  check(api.read_case(id, case_path));
  check(api.allocate_and_init(id));

  const auto n = static_cast<int>(check(api.get_integer(id, "MODEL.NPOIN")));
  std::vector<std::int64_t> zone(static_cast<std::size_t>(n));
  std::vector<double> xs(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    zone[i - 1] = check(api.get_integer(id, "MODEL.ZONE", i));
    xs[i - 1] = check(api.get_double(id, "MODEL.X", i));
  }

  for (std::size_t p = 0; p < bindings.size(); ++p) {
    const auto& b = bindings[p];
    if (!b.zone) {
      check(api.set_value(id, b.keyword, x[p]));
      continue;
    }
    bool hit = false;
    for (int i = 1; i <= n; ++i)
      if (zone[i - 1] == *b.zone) {
        check(api.set_value(id, b.keyword, i, 0, 0, x[p]));
        hit = true;
      }
    if (!hit)
      throw WorkflowError(ApiError{ErrorCode::IndexOutOfRange,
                                   "parameter " + b.name + ": zone " + std::to_string(*b.zone) + " has no cells", id,
                                   b.keyword});
  }

  // Recording schedule and gauge positions come from the steering file; DT
  // is read back in case a binding changed it.
  CaseConfig config;
  try {
    config = parse_case_file(case_path);
  } catch (const CaseError& e) {
    throw WorkflowError(ApiError{e.code(), e.what(), id, std::nullopt});
  }
  config.dt = check(api.get_double(id, "MODEL.DT"));
  config.ntimesteps = check(api.get_integer(id, "MODEL.NTIMESTEPS"));
  swe::RecordSchedule schedule;
  try {
    schedule = config.schedule();
  } catch (const std::invalid_argument& e) {
    throw WorkflowError(ApiError{ErrorCode::InvalidValue, e.what(), id, std::nullopt});
  }
  std::vector<swe::GaugeStencil> stencils;
  try {
    for (double g : config.gauges) stencils.push_back(swe::gauge_stencil(xs, g));
  } catch (const std::out_of_range& e) {
    throw WorkflowError(ApiError{ErrorCode::Inconsistent, e.what(), id, std::nullopt});
  }

  swe::GaugeRecord rec;
  rec.series.assign(stencils.size(), {});
  std::vector<double> surface(static_cast<std::size_t>(n));
  for (long k = 1; k <= config.ntimesteps; ++k) {
    check(api.run_timestep(id));
    if (!schedule.is_record_step(k)) continue;
    for (const auto& s : stencils) {
      surface[s.left] = check(api.get_double(id, "MODEL.Z", static_cast<int>(s.left) + 1));
      surface[s.right] = check(api.get_double(id, "MODEL.Z", static_cast<int>(s.right) + 1));
    }
    rec.times.push_back(check(api.get_double(id, "MODEL.AT")));
    for (std::size_t gi = 0; gi < stencils.size(); ++gi) rec.series[gi].push_back(stencils[gi].interpolate(surface));
  }
  return rec;
}

}  // namespace hydrocal::sim
