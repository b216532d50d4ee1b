/// @file pca.cpp
/// @brief Principal components of a trajectory ensemble.

#include "hydrocal/rom.hpp"

#include <Eigen/SVD>

#include <stdexcept>

namespace hydrocal::rom {

Centered center_columns(const Eigen::MatrixXd& o) {
  if (o.rows() < 2) throw std::invalid_argument("centering needs at least two rows");
  if (!o.allFinite()) throw std::invalid_argument("snapshot matrix contains non-finite values");
  Centered c;
  c.means = o.colwise().mean().transpose();
  c.values = o.rowwise() - c.means.transpose();
  return c;
}

PcaBasis pca(const Eigen::MatrixXd& oc, const Eigen::VectorXd& means) {
  if (oc.rows() < 1 || oc.cols() < 1) throw std::invalid_argument("empty snapshot matrix");
  if (!oc.allFinite()) throw std::invalid_argument("snapshot matrix contains non-finite values");
  const double n = static_cast<double>(oc.rows());
  Eigen::BDCSVD<Eigen::MatrixXd> svd(oc, Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw std::runtime_error("SVD did not converge");

  const Eigen::VectorXd& sigma = svd.singularValues();
  PcaBasis b;
  b.means = means.size() ? means : Eigen::VectorXd::Zero(oc.cols());
  b.modes = svd.matrixV();
  b.eigenvalues.resize(sigma.size());
  const double cutoff = sigma.size() ? 1e-12 * sigma(0) : 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > cutoff && sigma(i) > 0.0) {
      b.eigenvalues(i) = sigma(i) * sigma(i) / n;
      ++b.rank;
    } else {
      b.eigenvalues(i) = 0.0;
    }
  }
  for (Eigen::Index j = 0; j < b.modes.cols(); ++j) {
    Eigen::Index arg;
    b.modes.col(j).cwiseAbs().maxCoeff(&arg);
    if (b.modes(arg, j) < 0.0) b.modes.col(j) *= -1.0;
  }
  b.scores = oc * b.modes;
  return b;
}

PcaBasis PcaBasis::truncated(int k) const {
  if (k < 0 || k > size()) throw std::out_of_range("mode count out of range");
  PcaBasis t;
  t.means = means;
  t.eigenvalues = eigenvalues.head(k);
  t.modes = modes.leftCols(k);
  t.scores = scores.leftCols(k);
  t.rank = std::min(rank, k);
  return t;
}

Eigen::MatrixXd PcaBasis::reconstruct(int k) const {
  if (k < 0) k = size();
  return (scores.leftCols(k) * modes.leftCols(k).transpose()).rowwise() + means.transpose();
}

int truncate_basis(const Eigen::VectorXd& eigenvalues, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw std::invalid_argument("threshold must lie in (0, 1]");
  double total = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    if (eigenvalues(i) < 0.0) throw std::invalid_argument("negative eigenvalue");
    total += eigenvalues(i);
  }
  if (!(total > 0.0)) throw std::domain_error("all eigenvalues are zero");
  double cum = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    cum += eigenvalues(i);
    if (cum / total >= threshold) return static_cast<int>(i + 1);
  }
  return static_cast<int>(eigenvalues.size());
}

}  // namespace hydrocal::rom
