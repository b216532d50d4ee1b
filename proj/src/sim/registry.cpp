/// @file registry.cpp
/// @brief Keyword table of the instance API.

#include "instance.hpp"

#include <algorithm>
#include <cmath>

namespace hydrocal::sim {
namespace {

using enum ValueKind;
using enum Arity;
using enum Mutability;

std::size_t scalar(const Instance&) { return 0; }
std::size_t cells(const Instance& s) { return s.model.geometry.size(); }

double real_of(const Value& v) { return std::get<double>(v); }

double finite(const Value& v) {
  const double x = real_of(v);
  if (!std::isfinite(x)) throw InvalidValueError("value must be finite");
  return x;
}

double positive(const Value& v) {
  const double x = finite(v);
  if (!(x > 0.0)) throw InvalidValueError("value must be positive");
  return x;
}

double non_negative(const Value& v) {
  const double x = finite(v);
  if (x < 0.0) throw InvalidValueError("value must be non-negative");
  return x;
}

bool initialized(const Instance& s) { return s.phase >= Phase::Initialized; }

const std::vector<Accessor>& table() {
  static const std::vector<Accessor> t{
      {{"MODEL.AT", Real, Scalar, ReadOnly, Phase::Initialized, "simulated time (s)"},
       scalar, [](const Instance& s, std::size_t) -> Value { return s.state.t; }, nullptr},
      {{"MODEL.DT", Real, Scalar, ReadWrite, Phase::CaseRead, "time step (s)"},
       scalar, [](const Instance& s, std::size_t) -> Value { return s.config.dt; },
       [](Instance& s, std::size_t, const Value& v) { s.config.dt = positive(v); }},
      {{"MODEL.LT", Integer, Scalar, ReadOnly, Phase::Initialized, "time steps taken"},
       scalar, [](const Instance& s, std::size_t) -> Value { return s.lt; }, nullptr},
      {{"MODEL.NTIMESTEPS", Integer, Scalar, ReadWrite, Phase::CaseRead, "number of time steps"},
       scalar, [](const Instance& s, std::size_t) -> Value { return s.config.ntimesteps; },
       [](Instance& s, std::size_t, const Value& v) {
         const auto n = std::get<std::int64_t>(v);
         if (n < 0) throw InvalidValueError("value must be non-negative");
         s.config.ntimesteps = n;
       }},
      {{"MODEL.NPOIN", Integer, Scalar, ReadOnly, Phase::Initialized, "number of cells"},
       scalar,
       [](const Instance& s, std::size_t) -> Value { return static_cast<std::int64_t>(s.model.geometry.size()); },
       nullptr},
      {{"MODEL.X", Real, PerCell, ReadOnly, Phase::Initialized, "cell centre abscissa (m)"},
       cells, [](const Instance& s, std::size_t i) -> Value { return s.model.geometry.x[i]; }, nullptr},
      {{"MODEL.ZONE", Integer, PerCell, ReadOnly, Phase::Initialized, "friction zone of the cell"},
       cells,
       [](const Instance& s, std::size_t i) -> Value { return static_cast<std::int64_t>(s.model.geometry.zone[i]); },
       nullptr},
      {{"MODEL.BOTTOMELEVATION", Real, PerCell, ReadWrite, Phase::Initialized, "bed elevation (m)"},
       cells, [](const Instance& s, std::size_t i) -> Value { return s.model.geometry.zb[i]; },
       [](Instance& s, std::size_t i, const Value& v) { s.model.geometry.zb[i] = finite(v); }},
      {{"MODEL.CHESTR", Real, PerCell, ReadWrite, Phase::Initialized, "Strickler coefficient (m^1/3/s)"},
       cells, [](const Instance& s, std::size_t i) -> Value { return s.model.cell_ks[i]; },
       [](Instance& s, std::size_t i, const Value& v) { s.model.cell_ks[i] = positive(v); }},
      {{"MODEL.SEALEVEL", Real, Scalar, ReadWrite, Phase::CaseRead, "sea level offset gamma (m)"},
       scalar, [](const Instance& s, std::size_t) -> Value { return s.config.sealevel; },
       [](Instance& s, std::size_t, const Value& v) { s.config.sealevel = s.model.forcing.gamma = finite(v); }},
      {{"MODEL.TIDALRANGE", Real, Scalar, ReadWrite, Phase::CaseRead, "tidal amplitude factor alpha"},
       scalar, [](const Instance& s, std::size_t) -> Value { return s.config.tidalrange; },
       [](Instance& s, std::size_t, const Value& v) { s.config.tidalrange = s.model.forcing.alpha = finite(v); }},
      {{"MODEL.VELOCITYRANGE", Real, Scalar, ReadWrite, Phase::CaseRead, "tidal velocity factor beta"},
       scalar, [](const Instance& s, std::size_t) -> Value { return s.config.velocityrange; },
       [](Instance& s, std::size_t, const Value& v) { s.config.velocityrange = s.model.forcing.beta = finite(v); }},
      {{"MODEL.WATERDEPTH", Real, PerCell, ReadWrite, Phase::Initialized, "water depth (m)"},
       cells, [](const Instance& s, std::size_t i) -> Value { return s.state.h[i]; },
       [](Instance& s, std::size_t i, const Value& v) { s.state.h[i] = non_negative(v); }},
      {{"MODEL.VELOCITYU", Real, PerCell, ReadWrite, Phase::Initialized, "depth-averaged velocity (m/s)"},
       cells, [](const Instance& s, std::size_t i) -> Value { return s.state.u[i]; },
       [](Instance& s, std::size_t i, const Value& v) { s.state.u[i] = finite(v); }},
      {{"MODEL.Z", Real, PerCell, ReadOnly, Phase::Initialized, "free surface elevation (m)"},
       cells, [](const Instance& s, std::size_t i) -> Value { return swe::free_surface(s.state, s.model.geometry, i); },
       nullptr},
      {{"MODEL.DEBIT", Real, Scalar, ReadWrite, Phase::CaseRead, "upstream discharge per unit width (m^2/s)"},
       scalar,
       [](const Instance& s, std::size_t) -> Value {
         if (initialized(s) && !s.model.hydrograph.empty()) return s.model.discharge_at(s.state.t);
         return s.config.discharge;
       },
       [](Instance& s, std::size_t, const Value& v) {
         s.config.discharge = s.model.discharge = non_negative(v);
         s.config.hydrograph_file.reset();
         s.model.hydrograph.clear();
       }},
      {{"MODEL.CFL", Real, Scalar, ReadWrite, Phase::CaseRead, "Courant number bound"},
       scalar, [](const Instance& s, std::size_t) -> Value { return s.config.cfl; },
       [](Instance& s, std::size_t, const Value& v) {
         const double c = positive(v);
         if (c > 1.0) throw InvalidValueError("value must not exceed 1");
         s.config.cfl = s.model.cfl = c;
       }},
      {{"MODEL.GEOMETRYFILE", String, Scalar, ReadOnly, Phase::CaseRead, "geometry file of the case"},
       scalar, [](const Instance& s, std::size_t) -> Value { return s.config.geometry_file.string(); }, nullptr},
      {{"MODEL.BOUNDARYDRY", Boolean, Scalar, ReadOnly, Phase::Initialized,
        "whether the last step clamped a dry tidal boundary"},
       scalar, [](const Instance& s, std::size_t) -> Value { return s.boundary_dry; }, nullptr},
  };
  return t;
}

}  // namespace

const Accessor* find_accessor(std::string_view keyword) {
  const auto& t = table();
  const auto it = std::find_if(t.begin(), t.end(), [&](const Accessor& a) { return a.desc.keyword == keyword; });
  return it == t.end() ? nullptr : &*it;
}

std::span<const VariableDescriptor> registry() {
  static const std::vector<VariableDescriptor> descriptors = [] {
    std::vector<VariableDescriptor> d;
    for (const auto& a : table()) d.push_back(a.desc);
    return d;
  }();
  return descriptors;
}

const VariableDescriptor* find_variable(std::string_view keyword) {
  const auto* a = find_accessor(keyword);
  return a ? &a->desc : nullptr;
}

ValueKind kind_of(const Value& v) {
  switch (v.index()) {
    case 0: return Real;
    case 1: return Integer;
    case 2: return Boolean;
    default: return String;
  }
}

const char* to_string(ValueKind kind) {
  switch (kind) {
    case Real: return "real";
    case Integer: return "integer";
    case Boolean: return "boolean";
    case String: return "string";
  }
  return "?";
}

}  // namespace hydrocal::sim
