/// @file lars_pce.cpp
/// @brief Sparse PCE by hybrid least angle regression.
///
/// LARS (Efron et al. 2004) runs on the centred, unit-norm non-constant basis
/// columns and only supplies the order in which terms enter. Alongside it a
/// Gram-Schmidt factorisation Psi_A = Q R of the raw columns (constant first)
/// is grown one column per step, which gives the least-squares fit, the
/// leverages h_i = sum_j Q_ij^2 and ||R^-1||_F^2 = tr((Psi_A^T Psi_A)^-1) for
/// the corrected leave-one-out error of Blatman & Sudret (2011):
///
///   eps = mean((r_i / (1 - h_i))^2) / Var(y) * n / (n - P) * (1 + tr(C^-1) / n)
///
/// with C = Psi_A^T Psi_A / n.

#include "hydrocal/rom.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hydrocal::rom {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sample_variance(const Eigen::VectorXd& y) {
  const double m = y.mean();
  return (y.array() - m).square().sum() / static_cast<double>(y.size() - 1);
}

/// Nested least-squares fits over a growing column set.
class GrowingQr {
 public:
  GrowingQr(const Eigen::VectorXd& y, Eigen::Index capacity)
      : y_(y), n_(y.size()), q_(n_, capacity), rinv_(Eigen::MatrixXd::Zero(capacity, capacity)), qty_(capacity),
        resid_(y), lev_(Eigen::VectorXd::Zero(n_)) {}

  Eigen::Index size() const { return m_; }

  /// Appends a column; returns false (and changes nothing) when it is
  /// numerically dependent on the current ones.
  bool add(const Eigen::VectorXd& col, double tol) {
    const double norm0 = col.norm();
    if (!(norm0 > 0.0)) return false;
    Eigen::VectorXd v = col;
    Eigen::VectorXd r = Eigen::VectorXd::Zero(m_);
    for (int pass = 0; pass < 2 && m_ > 0; ++pass) {
      const Eigen::VectorXd proj = q_.leftCols(m_).transpose() * v;
      v.noalias() -= q_.leftCols(m_) * proj;
      r += proj;
    }
    const double rho = v.norm();
    if (rho <= tol * norm0) return false;
    const Eigen::VectorXd q = v / rho;
    q_.col(m_) = q;
    if (m_ > 0)
      rinv_.col(m_).head(m_) = (rinv_.topLeftCorner(m_, m_).triangularView<Eigen::Upper>() * r) / -rho;
    rinv_(m_, m_) = 1.0 / rho;
    frob_ += rinv_.col(m_).head(m_ + 1).squaredNorm();
    const double qy = q.dot(y_);
    qty_(m_) = qy;
    resid_ -= qy * q;
    lev_ += q.cwiseAbs2();
    ++m_;
    return true;
  }

  /// Corrected leave-one-out error of the current fit, relative to var_y.
  double corrected_loo(double var_y) const {
    const double n = static_cast<double>(n_);
    const double p = static_cast<double>(m_);
    if (n - p < 1.0) return kInf;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n_; ++i) {
      const double denom = 1.0 - lev_(i);
      if (denom <= 1e-10) return kInf;
      const double e = resid_(i) / denom;
      sum += e * e;
    }
    const double loo = sum / n / var_y;
    return loo * n / (n - p) * (1.0 + frob_);
  }

  /// Least-squares coefficients of the first m columns.
  Eigen::VectorXd coefficients(Eigen::Index m) const {
    return rinv_.topLeftCorner(m, m).triangularView<Eigen::Upper>() * qty_.head(m);
  }

 private:
  const Eigen::VectorXd& y_;
  Eigen::Index n_;
  Eigen::Index m_ = 0;
  Eigen::MatrixXd q_;
  Eigen::MatrixXd rinv_;
  Eigen::VectorXd qty_;
  Eigen::VectorXd resid_;
  Eigen::VectorXd lev_;
  double frob_ = 0.0;
};

void check_inputs(const Eigen::MatrixXd& unit, const Eigen::VectorXd& y) {
  if (unit.rows() != y.size()) throw std::invalid_argument("design and output sizes differ");
  if (unit.rows() < 3) throw std::invalid_argument("at least three samples are needed");
  if (!unit.allFinite() || !y.allFinite()) throw std::invalid_argument("non-finite training data");
  if (unit.minCoeff() < -1e-12 || unit.maxCoeff() > 1.0 + 1e-12)
    throw std::domain_error("training inputs must lie in the unit hypercube");
}

}  // namespace

PceModel fit_pce_lars(const Eigen::MatrixXd& unit, const Eigen::VectorXd& y, const LarsOptions& opt,
                      LarsDiagnostics* diag) {
  check_inputs(unit, y);
  if (opt.max_degree < 0) throw std::invalid_argument("negative degree");
  const Eigen::Index n = unit.rows();
  const int dim = static_cast<int>(unit.cols());
  const auto candidates = total_degree_set(dim, opt.max_degree);
  const Eigen::MatrixXd psi = basis_matrix(unit, candidates);
  const Eigen::Index P = psi.cols();

  LarsDiagnostics d;
  d.candidates = static_cast<int>(P);
  PceModel model;
  model.max_degree = opt.max_degree;
  model.dimension = dim;

  const double var_y = sample_variance(y);
  GrowingQr qr(y, std::min<Eigen::Index>(P, n));
  qr.add(psi.col(0), opt.degenerate_tolerance);
  if (!(var_y > 0.0)) {
    model.indices = {candidates[0]};
    model.coefficients = qr.coefficients(1);
    model.loo_error = 0.0;
    d.loo_path = {0.0};
    d.selected = 1;
    if (diag) *diag = d;
    return model;
  }
  d.loo_path.push_back(qr.corrected_loo(var_y));

  // Centred, unit-norm candidate columns (index j refers to psi column j + 1).
  const Eigen::Index m = P - 1;
  Eigen::MatrixXd x = psi.rightCols(m);
  x.rowwise() -= x.colwise().mean();
  enum class State { Inactive, Active, Excluded };
  std::vector<State> state(static_cast<std::size_t>(m), State::Inactive);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double nrm = x.col(j).norm();
    if (nrm > 1e-12 * std::sqrt(static_cast<double>(n))) {
      x.col(j) /= nrm;
    } else {
      state[static_cast<std::size_t>(j)] = State::Excluded;
      ++d.skipped;
    }
  }

  const Eigen::VectorXd yc = (y.array() - y.mean()).matrix();
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::Index> active;
  Eigen::MatrixXd chol(0, 0);  // lower factor of X_A^T X_A

  const Eigen::Index cap = opt.max_terms > 0 ? opt.max_terms : n - 2;
  const Eigen::Index max_steps = std::min<Eigen::Index>(m, std::max<Eigen::Index>(0, cap));

  auto try_add = [&](Eigen::Index j) {
    const auto k = static_cast<Eigen::Index>(active.size());
    Eigen::VectorXd g(k);
    for (Eigen::Index a = 0; a < k; ++a) g(a) = x.col(active[static_cast<std::size_t>(a)]).dot(x.col(j));
    Eigen::VectorXd z = g;
    if (k > 0) chol.triangularView<Eigen::Lower>().solveInPlace(z);
    const double d2 = 1.0 - z.squaredNorm();
    if (!(d2 > opt.degenerate_tolerance)) return false;
    if (!qr.add(psi.col(j + 1), opt.degenerate_tolerance)) return false;
    Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(k + 1, k + 1);
    grown.topLeftCorner(k, k) = chol;
    grown.row(k).head(k) = z.transpose();
    grown(k, k) = std::sqrt(d2);
    chol.swap(grown);
    active.push_back(j);
    state[static_cast<std::size_t>(j)] = State::Active;
    return true;
  };

  Eigen::VectorXd c = x.transpose() * yc;
  // Entry of the first term.
  Eigen::Index first = -1;
  double cmax = -1.0;
  for (Eigen::Index j = 0; j < m; ++j)
    if (state[static_cast<std::size_t>(j)] == State::Inactive && std::abs(c(j)) > cmax) {
      cmax = std::abs(c(j));
      first = j;
    }

  double best = d.loo_path[0];
  Eigen::Index best_step = 0;
  Eigen::Index pending = first;
  while (static_cast<Eigen::Index>(active.size()) < max_steps) {
    if (pending >= 0) {
      if (try_add(pending)) {
        ++d.steps;
        const double loo = qr.corrected_loo(var_y);
        d.loo_path.push_back(loo);
        if (loo < best) {
          best = loo;
          best_step = d.steps;
        }
        if (d.steps - best_step >= opt.patience) break;
        if (static_cast<Eigen::Index>(active.size()) >= max_steps) break;
      } else {
        state[static_cast<std::size_t>(pending)] = State::Excluded;
        ++d.skipped;
      }
    }
    if (active.empty()) {
      // Every candidate so far was degenerate: restart from the largest
      // remaining correlation.
      pending = -1;
      cmax = -1.0;
      for (Eigen::Index j = 0; j < m; ++j)
        if (state[static_cast<std::size_t>(j)] == State::Inactive && std::abs(c(j)) > cmax) {
          cmax = std::abs(c(j));
          pending = j;
        }
      if (pending < 0) break;
      continue;
    }

    // Equiangular direction of the active set.
    const auto k = static_cast<Eigen::Index>(active.size());
    Eigen::VectorXd s(k);
    double big_c = 0.0;
    for (Eigen::Index a = 0; a < k; ++a) {
      const double ca = c(active[static_cast<std::size_t>(a)]);
      s(a) = ca >= 0.0 ? 1.0 : -1.0;
      big_c = std::max(big_c, std::abs(ca));
    }
    Eigen::VectorXd w = s;
    chol.triangularView<Eigen::Lower>().solveInPlace(w);
    chol.transpose().triangularView<Eigen::Upper>().solveInPlace(w);
    const double norm_a = 1.0 / std::sqrt(s.dot(w));
    w *= norm_a;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    for (Eigen::Index a = 0; a < k; ++a) u += w(a) * x.col(active[static_cast<std::size_t>(a)]);
    const Eigen::VectorXd av = x.transpose() * u;

    double gamma = big_c / norm_a;
    pending = -1;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (state[static_cast<std::size_t>(j)] != State::Inactive) continue;
      for (const double cand : {(big_c - c(j)) / (norm_a - av(j)), (big_c + c(j)) / (norm_a + av(j))})
        if (cand > 1e-14 && cand < gamma) {
          gamma = cand;
          pending = j;
        }
    }
    mu += gamma * u;
    c = x.transpose() * (yc - mu);
    if (pending < 0) break;  // full least-squares fit of the active set reached
  }

  // Smallest nested set within rounding of the best score.
  Eigen::Index chosen = 0;
  for (std::size_t s = 0; s < d.loo_path.size(); ++s)
    if (d.loo_path[s] <= best + 1e-14) {
      chosen = static_cast<Eigen::Index>(s);
      break;
    }
  model.indices.push_back(candidates[0]);
  for (Eigen::Index a = 0; a < chosen; ++a)
    model.indices.push_back(candidates[static_cast<std::size_t>(active[static_cast<std::size_t>(a)] + 1)]);
  model.coefficients = qr.coefficients(chosen + 1);
  model.loo_error = d.loo_path[static_cast<std::size_t>(chosen)];
  d.selected = static_cast<int>(chosen + 1);
  if (diag) *diag = d;
  return model;
}

PceModel fit_pce_ols(const Eigen::MatrixXd& unit, const Eigen::VectorXd& y, const std::vector<MultiIndex>& indices) {
  check_inputs(unit, y);
  if (indices.empty()) throw std::invalid_argument("empty index set");
  const Eigen::MatrixXd psi = basis_matrix(unit, indices);
  GrowingQr qr(y, psi.cols());
  for (Eigen::Index j = 0; j < psi.cols(); ++j)
    if (!qr.add(psi.col(j), 1e-10)) throw std::domain_error("basis columns are linearly dependent");
  PceModel model;
  model.indices = indices;
  model.dimension = static_cast<int>(unit.cols());
  for (const auto& a : indices)
    for (int v : a) model.max_degree = std::max(model.max_degree, v);
  model.coefficients = qr.coefficients(psi.cols());
  const double var_y = sample_variance(y);
  model.loo_error = var_y > 0.0 ? qr.corrected_loo(var_y) : 0.0;
  return model;
}

}  // namespace hydrocal::rom
