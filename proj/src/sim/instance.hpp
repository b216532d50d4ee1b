// Internal state of an API instance and the keyword accessor table.
#pragma once

#include "hydrocal/sim_api.hpp"

namespace hydrocal::sim {

struct Instance {
  int id = 0;
  std::mutex mutex;
  Phase phase = Phase::Created;
  CaseConfig config;
  swe::ChannelModel model;
  swe::FlowState state;
  std::int64_t lt = 0;
  bool boundary_dry = false;
};

/// Raised by setters when a value has the right kind but is not admissible.
struct InvalidValueError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Accessor {
  VariableDescriptor desc;
  std::size_t (*extent)(const Instance&);
  Value (*get)(const Instance&, std::size_t);
  void (*set)(Instance&, std::size_t, const Value&);
};

const Accessor* find_accessor(std::string_view keyword);

}  // namespace hydrocal::sim
