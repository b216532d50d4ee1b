/// @file swe.hpp
/// @brief One-dimensional shallow-water channel solver.
///
/// Finite-volume scheme on a uniform grid of cell centres. Interface fluxes
/// use the HLL approximate Riemann solver applied to hydrostatically
/// reconstructed states, which keeps the lake at rest exact and the depth
/// non-negative. Bed friction follows the Strickler law and is integrated
/// implicitly, cell by cell, after the explicit flux update.
///
/// Boundaries: the first cell (smallest x) is the upstream end, fed by a
/// prescribed discharge or closed by a wall; the last cell is the seaward
/// end, driven by harmonic tidal forcing or closed by a wall.
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hydrocal::swe {

inline constexpr double kGravity = 9.81;
/// Cells shallower than this are dry and carry no momentum.
inline constexpr double kDryThreshold = 1e-6;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// dt exceeds the CFL-admissible step for the current state.
class StepSizeError : public SolverError {
 public:
  StepSizeError(double dt, double dt_max);
  double dt;
  double dt_max;
};

/// A non-finite value appeared during an update.
class BlowupError : public SolverError {
 public:
  BlowupError(std::size_t cell, double time);
  std::size_t cell;
  double time;
};

// ---------------------------------------------------------------------------
// Configuration types
// ---------------------------------------------------------------------------

struct ChannelGeometry {
  std::vector<double> x;   ///< cell centres (m), uniformly spaced
  std::vector<double> zb;  ///< bed elevation (m)
  std::vector<int> zone;   ///< friction zone per cell

  std::size_t size() const { return x.size(); }
  double dx() const { return x[1] - x[0]; }
  int zone_count() const;

  /// Throws std::invalid_argument when sizes, spacing or zone ids are bad.
  void validate() const;
};

struct FrictionParams {
  std::vector<double> ks;  ///< Strickler coefficient per zone (m^1/3 s^-1)
};

/// One harmonic constituent. Phases in radians, period in seconds.
struct TidalConstituent {
  double amplitude = 0.0;
  double period = 0.0;
  double phase = 0.0;
  double initial_phase = 0.0;
  double nodal_factor = 1.0;
  double nodal_phase = 0.0;
  double velocity_amplitude = 0.0;
  double velocity_phase = 0.0;
};

struct TidalForcing {
  std::vector<TidalConstituent> constituents;
  double alpha = 1.0;  ///< tidal range multiplier
  double beta = 1.0;   ///< tidal velocity multiplier
  double gamma = 0.0;  ///< sea level correction (m), subtracted from the level
  double z_ref = 0.0;  ///< mean reference level (m)
};

enum class UpstreamBoundary { Wall, Discharge };
enum class DownstreamBoundary { Wall, Tidal };

/// Full physical configuration of a channel run.
struct ChannelModel {
  ChannelGeometry geometry;
  std::vector<double> cell_ks;  ///< Strickler coefficient per cell
  TidalForcing forcing;
  UpstreamBoundary upstream = UpstreamBoundary::Discharge;
  DownstreamBoundary downstream = DownstreamBoundary::Tidal;
  /// Constant upstream discharge per unit width (m^2/s), used when the
  /// hydrograph table is empty.
  double discharge = 0.0;
  /// Optional (time s, discharge m^2/s) table, linearly interpolated and
  /// held constant outside its range.
  std::vector<std::pair<double, double>> hydrograph;
  double cfl = 0.9;
  bool friction = true;

  /// Expands per-zone coefficients onto the cells.
  void set_friction(const FrictionParams& params);
  double discharge_at(double t) const;
  void validate() const;
};

struct FlowState {
  std::vector<double> h;  ///< depth (m)
  std::vector<double> u;  ///< velocity (m/s)
  double t = 0.0;
};

struct GaugeSet {
  std::vector<double> positions;
  double record_interval = 600.0;
};

/// Linear interpolation weights between two neighbouring cells.
struct GaugeStencil {
  std::size_t left = 0;
  std::size_t right = 0;
  double weight = 0.0;  ///< weight of the right cell

  double interpolate(std::span<const double> values) const {
    return (1.0 - weight) * values[left] + weight * values[right];
  }
};

/// Throws std::out_of_range if @p position lies outside [x.front(), x.back()].
GaugeStencil gauge_stencil(std::span<const double> x, double position);

// ---------------------------------------------------------------------------
// Physics
// ---------------------------------------------------------------------------

/// Dimensionless friction coefficient 2g / (h^(1/3) ks^2).
double strickler_cf(double h, double ks);

/// Friction acceleration -(u / 2h) Cf |u|. Zero on dry cells.
double friction_source(double h, double u, double ks);

struct BoundaryValue {
  double h = 0.0;
  double u = 0.0;
  bool drying = false;  ///< forcing asked for a negative depth; h clamped to 0
};

/// Depth and velocity imposed at the tidal boundary at time @p t.
BoundaryValue tidal_boundary(const TidalForcing& forcing, double t, double zb_boundary);

/// Lake at rest at level @p level (dry where the bed is higher).
FlowState still_water(const ChannelGeometry& geometry, double level);

/// Largest stable step for the current state and boundary values.
double max_stable_dt(const FlowState& state, const ChannelModel& model);

struct StepReport {
  bool boundary_drying = false;
  bool flux_limited = false;  ///< positivity limiter was active somewhere
};

/// Advances @p state by @p dt in place.
void advance(FlowState& state, const ChannelModel& model, double dt, StepReport* report = nullptr);

/// Functional form of advance().
FlowState step(const FlowState& state, const ChannelModel& model, double dt,
               StepReport* report = nullptr);

inline double free_surface(const FlowState& state, const ChannelGeometry& geometry, std::size_t i) {
  return state.h[i] + geometry.zb[i];
}

// ---------------------------------------------------------------------------
// Gauge runs
// ---------------------------------------------------------------------------

/// Step counts of a run: spin-up, then records every record_every steps.
struct RecordSchedule {
  double dt = 0.0;
  long spinup_steps = 0;
  long record_every = 1;
  long records = 0;

  /// Validates that spin-up, interval and horizon are whole multiples of dt.
  static RecordSchedule from_times(double dt, double spinup, double record_interval, double horizon);

  long total_steps() const { return spinup_steps + record_every * records; }
  bool is_record_step(long step) const {
    return step > spinup_steps && (step - spinup_steps) % record_every == 0;
  }
  double time_of_step(long step) const { return static_cast<double>(step) * dt; }
};

struct GaugeRecord {
  std::vector<double> times;
  std::vector<std::vector<double>> series;  ///< [gauge][record] free surface (m)
};

/// Runs the model from @p initial and samples the free surface at the gauges.
/// Deterministic: identical inputs give bitwise-identical records.
GaugeRecord run_gauges(const ChannelModel& model, FlowState initial, const GaugeSet& gauges,
                       const RecordSchedule& schedule);

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// CSV with header `x,zb,zone`.
ChannelGeometry load_geometry_csv(const std::filesystem::path& path);
void write_geometry_csv(const std::filesystem::path& path, const ChannelGeometry& geometry);

/// CSV with header
/// `amplitude,period_s,phase_rad,phase0_rad,vel_amplitude,vel_phase_rad`.
std::vector<TidalConstituent> load_constituents_csv(const std::filesystem::path& path);
void write_constituents_csv(const std::filesystem::path& path,
                            std::span<const TidalConstituent> constituents);

/// CSV with header `time_s,discharge`.
std::vector<std::pair<double, double>> load_hydrograph_csv(const std::filesystem::path& path);

}  // namespace hydrocal::swe
