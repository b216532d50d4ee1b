/// @file cost.cpp
/// @brief Covariances, the 3D-Var cost and finite-difference gradients.

#include "hydrocal/assim.hpp"
#include "hydrocal/parallel.hpp"

#include <cmath>
#include <string>

namespace hydrocal::assim {

Covariances build_covariances(const Eigen::VectorXd& y, const Eigen::VectorXd& x0, double floor) {
  Covariances c;
  c.r_diag = (0.1 * y.cwiseAbs()).cwiseMax(floor);
  c.b_diag = (10.0 * x0.cwiseAbs()).cwiseMax(floor);
  return c;
}

void Problem::validate() const {
  const auto q = x0.size();
  if (q == 0) throw std::invalid_argument("no control parameters");
  if (b_diag.size() != q) throw std::invalid_argument("prior variance count does not match X0");
  if (static_cast<Eigen::Index>(bounds.size()) != q) throw std::invalid_argument("bound count does not match X0");
  if (!names.empty() && static_cast<Eigen::Index>(names.size()) != q)
    throw std::invalid_argument("name count does not match X0");
  if (y.size() == 0) throw std::invalid_argument("no observations");
  if (r_diag.size() != y.size()) throw std::invalid_argument("observation variance count does not match Y");
  if (!(b_diag.array() > 0.0).all() || !b_diag.allFinite()) throw std::invalid_argument("prior variances must be positive");
  if (!(r_diag.array() > 0.0).all() || !r_diag.allFinite())
    throw std::invalid_argument("observation variances must be positive");
  if (!y.allFinite()) throw std::invalid_argument("observations must be finite");
  for (Eigen::Index k = 0; k < q; ++k) {
    const auto [lo, hi] = bounds[static_cast<std::size_t>(k)];
    if (!(lo < hi)) throw std::invalid_argument("empty bound interval for parameter " + std::to_string(k));
    if (!(x0(k) >= lo && x0(k) <= hi)) throw std::invalid_argument("X0 lies outside the bounds");
  }
  if (!evaluator) throw std::invalid_argument("no evaluator");
}

CostValue cost(const Problem& p, const Eigen::VectorXd& x) {
  if (x.size() != p.x0.size()) throw std::invalid_argument("parameter vector has the wrong size");
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const auto [lo, hi] = p.bounds[static_cast<std::size_t>(k)];
    if (!(x(k) >= lo && x(k) <= hi)) throw std::domain_error("parameter " + std::to_string(k) + " outside its bounds");
  }
  CostValue c;
  try {
    c.model = p.evaluator(x);
  } catch (const EvaluationError&) {
    throw;
  } catch (const std::exception& e) {
    throw EvaluationError(std::string("model evaluation failed: ") + e.what(), x);
  }
  if (c.model.size() != p.y.size()) throw EvaluationError("model returned the wrong number of outputs", x);
  if (!c.model.allFinite()) throw EvaluationError("model returned non-finite outputs", x);
  const Eigen::VectorXd dx = x - p.x0;
  const Eigen::VectorXd dy = p.y - c.model;
  c.jb = 0.5 * dx.cwiseProduct(dx).cwiseQuotient(p.b_diag).sum();
  c.jobs = 0.5 * dy.cwiseProduct(dy).cwiseQuotient(p.r_diag).sum();
  c.j = c.jb + c.jobs;
  return c;
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                            const Bounds& bounds, const GradientOptions& opt, std::optional<double> fx) {
  const auto q = x.size();
  if (static_cast<Eigen::Index>(bounds.size()) != q) throw std::invalid_argument("bound count does not match x");
  if (!(opt.increment > 0.0)) throw std::invalid_argument("increment must be positive");

  // Per component: the points to evaluate and how to combine them.
  struct Stencil {
    double plus = 0.0, minus = 0.0;  // offsets; minus == 0 means use f(x)
    bool use_center = true;
  };
  std::vector<Stencil> st(static_cast<std::size_t>(q));
  for (Eigen::Index k = 0; k < q; ++k) {
    const auto [lo, hi] = bounds[static_cast<std::size_t>(k)];
    const double d = opt.space == IncrementSpace::Unit ? opt.increment * (hi - lo) : opt.increment;
    auto& s = st[static_cast<std::size_t>(k)];
    const bool up = x(k) + d <= hi, down = x(k) - d >= lo;
    if (opt.scheme == DifferenceScheme::Central && up && down) {
      s = {d, -d, false};
    } else if (up) {
      s = {d, 0.0, true};
    } else if (down) {
      s = {0.0, -d, true};
    } else {
      throw std::invalid_argument("bound interval of parameter " + std::to_string(k) + " is narrower than the increment");
    }
  }

  // Evaluation list: (component, offset) pairs, base point first if needed.
  struct Job {
    Eigen::Index k;
    double offset;
  };
  std::vector<Job> jobs;
  for (Eigen::Index k = 0; k < q; ++k) {
    const auto& s = st[static_cast<std::size_t>(k)];
    if (s.plus != 0.0) jobs.push_back({k, s.plus});
    if (s.minus != 0.0) jobs.push_back({k, s.minus});
  }
  bool need_center = false;
  for (const auto& s : st) need_center = need_center || s.use_center;
  double f0 = 0.0;
  if (need_center) f0 = fx ? *fx : f(x);

  std::vector<double> values(jobs.size());
  parallel_for(jobs.size(), opt.workers, [&](std::size_t i) {
    Eigen::VectorXd xp = x;
    xp(jobs[i].k) += jobs[i].offset;
    try {
      values[i] = f(xp);
    } catch (const std::exception& e) {
      throw EvaluationError(std::string(e.what()) + " (gradient component " + std::to_string(jobs[i].k) + ")", xp,
                            static_cast<int>(jobs[i].k));
    }
  });

  Eigen::VectorXd g(q);
  std::size_t i = 0;
  for (Eigen::Index k = 0; k < q; ++k) {
    const auto& s = st[static_cast<std::size_t>(k)];
    const double fp = s.plus != 0.0 ? values[i++] : f0;
    const double fm = s.minus != 0.0 ? values[i++] : f0;
    g(k) = (fp - fm) / (s.plus - s.minus);
  }
  return g;
}

Eigen::VectorXd fd_gradient(const Problem& p, const Eigen::VectorXd& x, const GradientOptions& opt,
                            const CostValue* at_x) {
  std::optional<double> fx;
  if (at_x) fx = at_x->j;
  return fd_gradient([&](const Eigen::VectorXd& xp) { return cost(p, xp).j; }, x, p.bounds, opt, fx);
}

}  // namespace hydrocal::assim
