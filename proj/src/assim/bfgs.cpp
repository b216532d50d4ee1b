/// @file bfgs.cpp
/// @brief Projected BFGS and the 3D-Var minimisation driver.

#include "hydrocal/assim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>

namespace hydrocal::assim {

std::string to_string(Status s) {
  switch (s) {
    case Status::Converged: return "converged";
    case Status::MaxIterations: return "max-iterations";
    case Status::StepCollapse: return "step-collapse";
    case Status::LineSearchFailed: return "line-search-failed";
  }
  return "unknown";
}

namespace {

Eigen::VectorXd project(const Eigen::VectorXd& x, const Bounds& b) {
  Eigen::VectorXd p = x;
  for (Eigen::Index k = 0; k < x.size(); ++k)
    p(k) = std::clamp(x(k), b[static_cast<std::size_t>(k)].first, b[static_cast<std::size_t>(k)].second);
  return p;
}

std::vector<int> active_set(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Bounds& b) {
  std::vector<int> a;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const auto [lo, hi] = b[static_cast<std::size_t>(k)];
    if ((x(k) <= lo && g(k) > 0.0) || (x(k) >= hi && g(k) < 0.0)) a.push_back(static_cast<int>(k));
  }
  return a;
}

double projected_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Bounds& b) {
  return (x - project(x - g, b)).cwiseAbs().maxCoeff();
}

}  // namespace

BfgsResult bfgs_minimize(const Objective& obj, const Eigen::VectorXd& start, const Bounds& bounds,
                         const BfgsOptions& opt) {
  const auto q = start.size();
  if (q == 0) throw std::invalid_argument("empty parameter vector");
  if (static_cast<Eigen::Index>(bounds.size()) != q) throw std::invalid_argument("bound count does not match x0");
  for (const auto& [lo, hi] : bounds)
    if (!(lo <= hi)) throw std::invalid_argument("inverted bound interval");

  BfgsResult r;
  Eigen::VectorXd x = project(start, bounds);
  double f = obj.value(x);
  if (!std::isfinite(f)) throw std::runtime_error("objective is not finite at the starting point");
  Eigen::VectorXd g = obj.gradient(x, f);
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(q, q);
  bool identity = true;

  auto record = [&](int it) {
    r.iterates.push_back({it, x, f, projected_norm(x, g, bounds), active_set(x, g, bounds)});
  };
  record(0);
  r.status = Status::MaxIterations;

  for (int it = 1;; ++it) {
    if (projected_norm(x, g, bounds) < opt.grad_tol) {
      r.status = Status::Converged;
      break;
    }
    if (it > opt.max_iter) break;

    const auto active = active_set(x, g, bounds);
    Eigen::VectorXd mask = Eigen::VectorXd::Ones(q);
    for (int k : active) mask(k) = 0.0;
    const Eigen::VectorXd gf = g.cwiseProduct(mask);
    Eigen::VectorXd d = -(H * gf).cwiseProduct(mask);
    if (!(gf.dot(d) < 0.0)) {
      H.setIdentity();
      identity = true;
      d = -gf;
    }

    bool accepted = false;
    bool collapsed = false;
    Eigen::VectorXd xn;
    double fn = 0.0;
    for (int attempt = 0; attempt < 2 && !accepted && !collapsed; ++attempt) {
      double alpha = identity ? std::min(1.0, 0.1 / d.cwiseAbs().maxCoeff()) : 1.0;
      for (int bt = 0; bt <= opt.max_backtracks; ++bt, alpha *= 0.5) {
        xn = project(x + alpha * d, bounds);
        const Eigen::VectorXd s = xn - x;
        if (s.cwiseAbs().maxCoeff() < opt.step_tol) {
          collapsed = true;
          break;
        }
        fn = obj.value(xn);
        if (std::isfinite(fn) && fn <= f + opt.armijo * std::min(0.0, g.dot(s)) && fn <= f) {
          accepted = true;
          break;
        }
      }
      if (!accepted && !collapsed && !identity) {
        // retry along steepest descent
        H.setIdentity();
        identity = true;
        d = -gf;
      } else {
        break;
      }
    }
    if (collapsed) {
      r.status = Status::StepCollapse;
      break;
    }
    if (!accepted) {
      r.status = Status::LineSearchFailed;
      break;
    }

    const Eigen::VectorXd gn = obj.gradient(xn, fn);
    const Eigen::VectorXd s = xn - x;
    const Eigen::VectorXd y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (identity) H *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(q, q);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
      identity = false;
    }
    const double drop = f - fn;
    x = xn;
    f = fn;
    g = gn;
    r.iterations = it;
    record(it);
    if (opt.f_rel_tol > 0.0 && drop <= opt.f_rel_tol * std::max(std::abs(f), 1.0)) {
      r.status = Status::Converged;
      break;
    }
  }
  r.x = x;
  r.f = f;
  return r;
}

MinimizeResult minimize(const Problem& problem, const MinimizeOptions& options) {
  problem.validate();
  const auto q = problem.x0.size();
  auto counter = std::make_shared<std::atomic<long>>(0);
  Problem p = problem;
  p.evaluator = [inner = problem.evaluator, counter](const Eigen::VectorXd& x) {
    ++*counter;
    return inner(x);
  };

  Eigen::VectorXd lo(q), width(q);
  for (Eigen::Index k = 0; k < q; ++k) {
    lo(k) = p.bounds[static_cast<std::size_t>(k)].first;
    width(k) = p.bounds[static_cast<std::size_t>(k)].second - lo(k);
  }
  auto to_x = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd x = lo + u.cwiseProduct(width);
    for (Eigen::Index k = 0; k < q; ++k) x(k) = std::clamp(x(k), lo(k), lo(k) + width(k));
    return x;
  };

  CostValue last;
  Eigen::VectorXd last_u;
  Objective obj;
  obj.value = [&](const Eigen::VectorXd& u) {
    last = cost(p, to_x(u));
    last_u = u;
    return last.j;
  };
  obj.gradient = [&](const Eigen::VectorXd& u, double) {
    const CostValue* at = (last_u.size() == u.size() && last_u == u) ? &last : nullptr;
    return Eigen::VectorXd(fd_gradient(p, to_x(u), options.gradient, at).cwiseProduct(width));
  };

  MinimizeResult out;
  std::vector<CostValue> accepted;
  const Eigen::VectorXd u0 = (p.x0 - lo).cwiseQuotient(width);
  Bounds unit(static_cast<std::size_t>(q), {0.0, 1.0});

  // Wrap the gradient to capture the accepted cost split: the gradient is
  // only requested at accepted points, right after their value call.
  auto value_at_accept = obj.gradient;
  obj.gradient = [&](const Eigen::VectorXd& u, double fu) {
    accepted.push_back(last);
    auto g = value_at_accept(u, fu);
    out.trace.emplace_back().evaluations = counter->load();
    return g;
  };

  const auto res = bfgs_minimize(obj, u0, unit, options.bfgs);
  for (std::size_t i = 0; i < res.iterates.size(); ++i) {
    auto& t = out.trace[i];
    const auto& it = res.iterates[i];
    t.iteration = it.iteration;
    t.x = to_x(it.x);
    t.j = accepted[i].j;
    t.jb = accepted[i].jb;
    t.jobs = accepted[i].jobs;
    t.gradient_norm = it.projected_gradient;
    t.active = it.active;
  }
  out.trace.resize(res.iterates.size());
  out.x_map = to_x(res.x);
  out.at_map = accepted[res.iterates.size() - 1];
  out.status = res.status;
  out.iterations = res.iterations;
  out.evaluations = counter->load();
  return out;
}

}  // namespace hydrocal::assim
