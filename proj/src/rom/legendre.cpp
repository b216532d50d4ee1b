/// @file legendre.cpp
/// @brief Orthonormal Legendre polynomials and total-degree index sets.

#include "hydrocal/rom.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace hydrocal::rom {
namespace {

/// psi_0..psi_degree at x.
void legendre_table(int degree, double x, double* out) {
  double p_prev = 1.0, p = x;
  out[0] = 1.0;
  if (degree >= 1) out[1] = std::sqrt(3.0) * x;
  for (int k = 1; k < degree; ++k) {
    const double next = ((2.0 * k + 1.0) * x * p - k * p_prev) / (k + 1.0);
    p_prev = p;
    p = next;
    out[k + 1] = std::sqrt(2.0 * k + 3.0) * p;
  }
}

}  // namespace

double legendre(int n, double x) {
  if (n < 0) throw std::invalid_argument("negative polynomial degree");
  std::vector<double> t(static_cast<std::size_t>(n) + 1);
  legendre_table(n, x, t.data());
  return t.back();
}

std::vector<MultiIndex> total_degree_set(int dim, int degree) {
  if (dim < 1 || degree < 0) throw std::invalid_argument("invalid dimension or degree");
  std::vector<MultiIndex> out;
  MultiIndex cur(static_cast<std::size_t>(dim), 0);
  std::function<void(int, int)> fill = [&](int k, int left) {
    if (k == dim - 1) {
      cur[static_cast<std::size_t>(k)] = left;
      out.push_back(cur);
      return;
    }
    for (int v = left; v >= 0; --v) {
      cur[static_cast<std::size_t>(k)] = v;
      fill(k + 1, left - v);
    }
  };
  for (int d = 0; d <= degree; ++d) fill(0, d);
  return out;
}

Eigen::MatrixXd basis_matrix(const Eigen::MatrixXd& unit, const std::vector<MultiIndex>& indices) {
  const auto n = unit.rows();
  const auto p = unit.cols();
  int degree = 0;
  for (const auto& a : indices) {
    if (static_cast<Eigen::Index>(a.size()) != p) throw std::invalid_argument("multi-index dimension mismatch");
    for (int v : a) degree = std::max(degree, v);
  }
  // table(i, k * (degree + 1) + d) = psi_d(x_ik)
  Eigen::MatrixXd table(n, p * (degree + 1));
  std::vector<double> buf(static_cast<std::size_t>(degree) + 1);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < p; ++k) {
      legendre_table(degree, 2.0 * unit(i, k) - 1.0, buf.data());
      for (int d = 0; d <= degree; ++d) table(i, k * (degree + 1) + d) = buf[static_cast<std::size_t>(d)];
    }
  Eigen::MatrixXd psi(n, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t a = 0; a < indices.size(); ++a) {
    auto col = psi.col(static_cast<Eigen::Index>(a));
    col.setOnes();
    for (Eigen::Index k = 0; k < p; ++k) {
      const int d = indices[a][static_cast<std::size_t>(k)];
      if (d > 0) col.array() *= table.col(k * (degree + 1) + d).array();
    }
  }
  return psi;
}

double PceModel::evaluate(std::span<const double> unit_x) const {
  if (static_cast<int>(unit_x.size()) != dimension) throw std::invalid_argument("input dimension mismatch");
  Eigen::MatrixXd u(1, dimension);
  for (int k = 0; k < dimension; ++k) u(0, k) = unit_x[static_cast<std::size_t>(k)];
  return evaluate(u)(0);
}

Eigen::VectorXd PceModel::evaluate(const Eigen::MatrixXd& unit) const {
  if (unit.cols() != dimension) throw std::invalid_argument("input dimension mismatch");
  return basis_matrix(unit, indices) * coefficients;
}

double PceModel::mean() const {
  for (std::size_t a = 0; a < indices.size(); ++a) {
    bool constant = true;
    for (int v : indices[a]) constant = constant && v == 0;
    if (constant) return coefficients(static_cast<Eigen::Index>(a));
  }
  return 0.0;
}

double PceModel::variance() const {
  double v = 0.0;
  for (std::size_t a = 0; a < indices.size(); ++a) {
    bool constant = true;
    for (int d : indices[a]) constant = constant && d == 0;
    if (!constant) v += coefficients(static_cast<Eigen::Index>(a)) * coefficients(static_cast<Eigen::Index>(a));
  }
  return v;
}

}  // namespace hydrocal::rom
