/// @file kernel.cpp
/// @brief Finite-volume update and gauge runs.
///
/// Interface treatment follows the hydrostatic reconstruction of Audusse et
/// al. (2004): at each face the bed is raised to max(zb_L, zb_R), the depths
/// are reconstructed from the free surface, HLL is evaluated on these states
/// and each side receives a pressure correction g/2 (h_i^2 - h*^2). The h_i^2
/// terms of a cell's two faces cancel and are dropped from the update.

#include "hydrocal/swe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hydrocal::swe {
namespace {

constexpr double g = kGravity;

struct Flux {
  double mass = 0.0;
  double mom = 0.0;
};

struct Ghost {
  double h = 0.0;
  double u = 0.0;
  double zb = 0.0;
};

struct Boundaries {
  Ghost left;
  Ghost right;
  bool drying = false;
};

Flux hll(double hl, double ul, double hr, double ur) {
  if (hl <= 0.0 && hr <= 0.0) return {};
  const double ql = hl * ul;
  const double qr = hr * ur;
  const Flux fl{ql, ql * ul + 0.5 * g * hl * hl};
  if (hl == hr && ul == ur) return fl;
  const Flux fr{qr, qr * ur + 0.5 * g * hr * hr};
  const double cl = std::sqrt(g * hl);
  const double cr = std::sqrt(g * hr);
  double sl;
  double sr;
  if (hl <= 0.0) {
    sl = ur - 2.0 * cr;
    sr = ur + cr;
  } else if (hr <= 0.0) {
    sl = ul - cl;
    sr = ul + 2.0 * cl;
  } else {
    sl = std::min(ul - cl, ur - cr);
    sr = std::max(ul + cl, ur + cr);
  }
  if (sl >= 0.0) return fl;
  if (sr <= 0.0) return fr;
  const double inv = 1.0 / (sr - sl);
  return {(sr * fl.mass - sl * fr.mass + sl * sr * (hr - hl)) * inv,
          (sr * fl.mom - sl * fr.mom + sl * sr * (qr - ql)) * inv};
}

/// Depth at the upstream ghost cell such that the ghost carries discharge q
/// and the outgoing Riemann invariant u - 2c of the first cell.
double characteristic_depth(double q, double h0, double u0) {
  const double w = (h0 > kDryThreshold ? u0 : 0.0) - 2.0 * std::sqrt(g * h0);
  if (q <= 0.0) return w >= 0.0 ? 0.0 : w * w / (4.0 * g);
  auto f = [&](double h) { return q / h - 2.0 * std::sqrt(g * h) - w; };
  double hi = std::max({h0, std::cbrt(q * q / g), 1e-3});
  while (f(hi) > 0.0) hi *= 2.0;
  double lo = hi;
  while (f(lo) < 0.0) lo *= 0.5;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Boundaries boundary_states(const FlowState& s, const ChannelModel& m) {
  const auto n = m.geometry.size();
  const auto& zb = m.geometry.zb;
  Boundaries b;
  b.left.zb = zb[0];
  if (m.upstream == UpstreamBoundary::Wall) {
    b.left.h = s.h[0];
    b.left.u = -s.u[0];
  } else {
    const double q = m.discharge_at(s.t);
    b.left.h = characteristic_depth(q, s.h[0], s.u[0]);
    b.left.u = b.left.h > kDryThreshold ? q / b.left.h : 0.0;
  }
  b.right.zb = zb[n - 1];
  if (m.downstream == DownstreamBoundary::Wall) {
    b.right.h = s.h[n - 1];
    b.right.u = -s.u[n - 1];
  } else {
    const auto tide = tidal_boundary(m.forcing, s.t, zb[n - 1]);
    b.right.h = tide.h;
    // Velocity constituents are imposed only while the sea flows in.
    b.right.u = tide.u < 0.0 ? tide.u : s.u[n - 1];
    b.drying = tide.drying;
  }
  return b;
}

double wave_speed(double h, double u) {
  return h > kDryThreshold ? std::abs(u) + std::sqrt(g * h) : 0.0;
}

double stable_dt(const FlowState& s, const ChannelModel& m, const Boundaries& b) {
  double smax = std::max(wave_speed(b.left.h, b.left.u), wave_speed(b.right.h, b.right.u));
  for (std::size_t i = 0; i < s.h.size(); ++i) smax = std::max(smax, wave_speed(s.h[i], s.u[i]));
  if (smax == 0.0) return std::numeric_limits<double>::infinity();
  return m.cfl * m.geometry.dx() / smax;
}

}  // namespace

double max_stable_dt(const FlowState& state, const ChannelModel& model) {
  return stable_dt(state, model, boundary_states(state, model));
}

void advance(FlowState& s, const ChannelModel& m, double dt, StepReport* report) {
  const auto n = m.geometry.size();
  const auto& zb = m.geometry.zb;
  if (s.h.size() != n || s.u.size() != n)
    throw std::invalid_argument("state size does not match the geometry");
  if (!(dt > 0.0)) throw StepSizeError(dt, 0.0);

  const Boundaries b = boundary_states(s, m);
  const double dt_max = stable_dt(s, m, b);
  if (dt > dt_max * (1.0 + 1e-12)) throw StepSizeError(dt, dt_max);

  // Face f separates cell f-1 (left) and cell f (right); faces 0 and n touch
  // the ghosts.
  std::vector<Flux> flux(n + 1);
  std::vector<double> left_corr(n + 1);   // g/2 h*_L^2, seen by the left cell
  std::vector<double> right_corr(n + 1);  // g/2 h*_R^2, seen by the right cell
  for (std::size_t f = 0; f <= n; ++f) {
    const double hl = f == 0 ? b.left.h : s.h[f - 1];
    const double ul = f == 0 ? b.left.u : s.u[f - 1];
    const double zl = f == 0 ? b.left.zb : zb[f - 1];
    const double hr = f == n ? b.right.h : s.h[f];
    const double ur = f == n ? b.right.u : s.u[f];
    const double zr = f == n ? b.right.zb : zb[f];
    const double zf = std::max(zl, zr);
    const double hls = std::max(0.0, hl + zl - zf);
    const double hrs = std::max(0.0, hr + zr - zf);
    flux[f] = hll(hls, hls > 0.0 ? ul : 0.0, hrs, hrs > 0.0 ? ur : 0.0);
    left_corr[f] = 0.5 * g * hls * hls;
    right_corr[f] = 0.5 * g * hrs * hrs;
  }
  if (m.upstream == UpstreamBoundary::Wall) flux[0].mass = 0.0;
  if (m.downstream == DownstreamBoundary::Wall) flux[n].mass = 0.0;

  // Positivity limiter: scale the fluxes leaving a cell so that it cannot
  // export more water than it holds.
  const double r = dt / m.geometry.dx();
  std::vector<double> theta(n, 1.0);
  bool limited = false;
  for (std::size_t i = 0; i < n; ++i) {
    const double out = r * (std::max(flux[i + 1].mass, 0.0) + std::max(-flux[i].mass, 0.0));
    if (out > s.h[i]) {
      theta[i] = s.h[i] / out;
      limited = true;
    }
  }
  if (limited) {
    for (std::size_t f = 0; f <= n; ++f) {
      double t = 1.0;
      if (flux[f].mass > 0.0 && f > 0) t = theta[f - 1];
      if (flux[f].mass < 0.0 && f < n) t = theta[f];
      flux[f].mass *= t;
      flux[f].mom *= t;
    }
  }

  const double t_new = s.t + dt;
  std::vector<double> h_new(n), u_new(n);
  for (std::size_t i = 0; i < n; ++i) {
    double h = s.h[i] - r * (flux[i + 1].mass - flux[i].mass);
    const double q = s.h[i] * s.u[i] -
                     r * ((flux[i + 1].mom - left_corr[i + 1]) - (flux[i].mom - right_corr[i]));
    if (!std::isfinite(h) || !std::isfinite(q)) throw BlowupError(i, t_new);
    h = std::max(h, 0.0);
    double u = 0.0;
    if (h >= kDryThreshold) {
      u = q / h;
      if (m.friction) {
        const double ks = m.cell_ks[i];
        u /= 1.0 + dt * g * std::abs(u) / (ks * ks * h * std::cbrt(h));
      }
    }
    if (!std::isfinite(u)) throw BlowupError(i, t_new);
    h_new[i] = h;
    u_new[i] = u;
  }
  s.h.swap(h_new);
  s.u.swap(u_new);
  s.t = t_new;
  if (report) {
    report->boundary_drying = b.drying;
    report->flux_limited = limited;
  }
}

FlowState step(const FlowState& state, const ChannelModel& model, double dt, StepReport* report) {
  FlowState next = state;
  advance(next, model, dt, report);
  return next;
}

RecordSchedule RecordSchedule::from_times(double dt, double spinup, double record_interval,
                                          double horizon) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  if (spinup < 0.0 || !(record_interval > 0.0) || horizon < 0.0)
    throw std::invalid_argument("spin-up, record interval and horizon must be non-negative");
  auto whole = [](double a, double b, const char* what) {
    const double ratio = a / b;
    const double k = std::round(ratio);
    if (std::abs(ratio - k) > 1e-9 * std::max(1.0, ratio))
      throw std::invalid_argument(std::string(what) + " is not a whole multiple");
    return static_cast<long>(k);
  };
  RecordSchedule s;
  s.dt = dt;
  s.spinup_steps = whole(spinup, dt, "spin-up duration / time step");
  s.record_every = whole(record_interval, dt, "record interval / time step");
  s.records = whole(horizon, record_interval, "horizon / record interval");
  if (s.record_every < 1) throw std::invalid_argument("record interval shorter than the time step");
  return s;
}

GaugeRecord run_gauges(const ChannelModel& model, FlowState state, const GaugeSet& gauges,
                       const RecordSchedule& schedule) {
  model.validate();
  std::vector<GaugeStencil> stencils;
  for (double p : gauges.positions) stencils.push_back(gauge_stencil(model.geometry.x, p));

  GaugeRecord rec;
  rec.series.assign(stencils.size(), {});
  for (auto& s : rec.series) s.reserve(static_cast<std::size_t>(schedule.records));
  std::vector<double> surface(model.geometry.size());

  state.t = 0.0;
  for (long k = 1; k <= schedule.total_steps(); ++k) {
    advance(state, model, schedule.dt);
    if (!schedule.is_record_step(k)) continue;
    for (std::size_t i = 0; i < surface.size(); ++i) surface[i] = free_surface(state, model.geometry, i);
    rec.times.push_back(state.t);
    for (std::size_t gi = 0; gi < stencils.size(); ++gi)
      rec.series[gi].push_back(stencils[gi].interpolate(surface));
  }
  return rec;
}

}  // namespace hydrocal::swe
