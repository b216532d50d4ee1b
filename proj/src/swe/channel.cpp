/// @file channel.cpp
/// @brief Channel configuration, friction law and tidal forcing.

#include "hydrocal/swe.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace hydrocal::swe {

StepSizeError::StepSizeError(double dt_, double dt_max_)
    : SolverError([&] {
        std::ostringstream msg;
        msg.precision(17);
        msg << "time step " << dt_ << " s exceeds the CFL limit " << dt_max_ << " s";
        return msg.str();
      }()),
      dt(dt_),
      dt_max(dt_max_) {}

BlowupError::BlowupError(std::size_t cell_, double time_)
    : SolverError("non-finite state in cell " + std::to_string(cell_) + " at t=" +
                  std::to_string(time_) + " s"),
      cell(cell_),
      time(time_) {}

int ChannelGeometry::zone_count() const {
  if (zone.empty()) return 0;
  return *std::max_element(zone.begin(), zone.end()) + 1;
}

void ChannelGeometry::validate() const {
  const auto n = x.size();
  if (n < 3) throw std::invalid_argument("geometry needs at least 3 cells");
  if (zb.size() != n || zone.size() != n)
    throw std::invalid_argument("geometry arrays have inconsistent lengths");
  const double spacing = x[1] - x[0];
  if (!(spacing > 0.0)) throw std::invalid_argument("cell centres must be strictly increasing");
  for (std::size_t i = 1; i < n; ++i) {
    const double d = x[i] - x[i - 1];
    if (!(d > 0.0)) throw std::invalid_argument("cell centres must be strictly increasing");
    if (std::abs(d - spacing) > 1e-9 * std::max(1.0, std::abs(spacing)))
      throw std::invalid_argument("cell spacing must be uniform (cell " + std::to_string(i) + ")");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(zb[i]))
      throw std::invalid_argument("non-finite geometry value at cell " + std::to_string(i));
    if (zone[i] < 0) throw std::invalid_argument("negative zone id at cell " + std::to_string(i));
  }
  const int nz = zone_count();
  std::vector<bool> seen(static_cast<std::size_t>(nz), false);
  for (int z : zone) seen[static_cast<std::size_t>(z)] = true;
  for (int z = 0; z < nz; ++z)
    if (!seen[static_cast<std::size_t>(z)])
      throw std::invalid_argument("friction zone " + std::to_string(z) + " has no cells");
}

void ChannelModel::set_friction(const FrictionParams& params) {
  const int nz = geometry.zone_count();
  if (static_cast<int>(params.ks.size()) != nz)
    throw std::invalid_argument("expected " + std::to_string(nz) + " Strickler coefficients, got " +
                                std::to_string(params.ks.size()));
  cell_ks.resize(geometry.size());
  for (std::size_t i = 0; i < geometry.size(); ++i)
    cell_ks[i] = params.ks[static_cast<std::size_t>(geometry.zone[i])];
}

double ChannelModel::discharge_at(double t) const {
  if (hydrograph.empty()) return discharge;
  if (t <= hydrograph.front().first) return hydrograph.front().second;
  if (t >= hydrograph.back().first) return hydrograph.back().second;
  const auto it = std::upper_bound(hydrograph.begin(), hydrograph.end(), t,
                                   [](double v, const auto& p) { return v < p.first; });
  const auto& [t1, q1] = *it;
  const auto& [t0, q0] = *(it - 1);
  return q0 + (q1 - q0) * (t - t0) / (t1 - t0);
}

void ChannelModel::validate() const {
  geometry.validate();
  if (cell_ks.size() != geometry.size())
    throw std::invalid_argument("friction coefficients do not match the cell count");
  for (double k : cell_ks)
    if (!(k > 0.0) || !std::isfinite(k))
      throw std::invalid_argument("Strickler coefficients must be positive");
  if (!(cfl > 0.0 && cfl <= 1.0)) throw std::invalid_argument("CFL number must lie in (0, 1]");
  for (const auto& c : forcing.constituents)
    if (!(c.period > 0.0)) throw std::invalid_argument("constituent periods must be positive");
  for (std::size_t i = 1; i < hydrograph.size(); ++i)
    if (!(hydrograph[i].first > hydrograph[i - 1].first))
      throw std::invalid_argument("hydrograph times must be increasing");
  if (upstream == UpstreamBoundary::Discharge) {
    if (discharge < 0.0) throw std::invalid_argument("upstream discharge must be non-negative");
    for (const auto& p : hydrograph)
      if (p.second < 0.0) throw std::invalid_argument("upstream discharge must be non-negative");
  }
}

GaugeStencil gauge_stencil(std::span<const double> x, double position) {
  if (x.size() < 2 || position < x.front() || position > x.back())
    throw std::out_of_range("gauge position " + std::to_string(position) + " outside the channel");
  const auto it = std::upper_bound(x.begin(), x.end(), position);
  GaugeStencil s;
  if (it == x.end()) {
    s.left = x.size() - 2;
    s.right = x.size() - 1;
    s.weight = 1.0;
    return s;
  }
  s.right = static_cast<std::size_t>(it - x.begin());
  s.left = s.right - 1;
  s.weight = (position - x[s.left]) / (x[s.right] - x[s.left]);
  return s;
}

double strickler_cf(double h, double ks) {
  if (!(h > 0.0) || !(ks > 0.0))
    throw std::domain_error("Strickler coefficient needs positive depth and roughness");
  return 2.0 * kGravity / (std::cbrt(h) * ks * ks);
}

double friction_source(double h, double u, double ks) {
  if (h < kDryThreshold || u == 0.0) return 0.0;
  return -(u / (2.0 * h)) * strickler_cf(h, ks) * std::abs(u);
}

BoundaryValue tidal_boundary(const TidalForcing& forcing, double t, double zb_boundary) {
  if (t < 0.0) throw std::domain_error("tidal forcing is defined for t >= 0");
  double eta = 0.0;
  double vel = 0.0;
  for (const auto& c : forcing.constituents) {
    const double omega_t = 2.0 * std::numbers::pi * t / c.period;
    eta += c.nodal_factor * c.amplitude *
           std::cos(omega_t - c.phase + c.initial_phase + c.nodal_phase);
    vel += c.nodal_factor * c.velocity_amplitude *
           std::cos(omega_t - c.velocity_phase + c.initial_phase + c.nodal_phase);
  }
  BoundaryValue b;
  b.h = forcing.alpha * eta - zb_boundary + forcing.z_ref - forcing.gamma;
  b.u = forcing.beta * vel;
  if (b.h < 0.0) {
    b.h = 0.0;
    b.u = 0.0;
    b.drying = true;
  }
  return b;
}

FlowState still_water(const ChannelGeometry& geometry, double level) {
  FlowState s;
  s.h.resize(geometry.size());
  s.u.assign(geometry.size(), 0.0);
  for (std::size_t i = 0; i < geometry.size(); ++i) s.h[i] = std::max(0.0, level - geometry.zb[i]);
  return s;
}

}  // namespace hydrocal::swe
