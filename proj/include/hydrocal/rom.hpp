/// @file rom.hpp
/// @brief Reduced-order model: PCA of trajectories with one sparse
/// polynomial chaos expansion per retained mode.
#pragma once

#include "hydrocal/doe.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hydrocal::rom {

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

struct Centered {
  Eigen::MatrixXd values;  ///< column-centred copy
  Eigen::VectorXd means;   ///< column means
};

/// Throws std::invalid_argument for fewer than two rows or non-finite data.
Centered center_columns(const Eigen::MatrixXd& o);

struct PcaBasis {
  Eigen::VectorXd means;        ///< length T
  Eigen::VectorXd eigenvalues;  ///< descending, exact zeros below the rank cutoff
  Eigen::MatrixXd modes;        ///< T x m, orthonormal columns
  Eigen::MatrixXd scores;       ///< n x m, H = Oc * modes
  int rank = 0;

  int size() const { return static_cast<int>(eigenvalues.size()); }
  /// Keeps the first k modes.
  PcaBasis truncated(int k) const;
  /// means + scores * modes^T for the first k modes (all when k < 0).
  Eigen::MatrixXd reconstruct(int k = -1) const;
};

/// Eigen-decomposition of Oc^T Oc / n through the SVD of Oc. Singular values
/// below 1e-12 times the largest count as zero. Each mode is signed so that
/// its largest-magnitude entry is positive.
PcaBasis pca(const Eigen::MatrixXd& oc, const Eigen::VectorXd& means = {});

/// Smallest k whose leading eigenvalues explain at least @p threshold of the
/// total. Throws std::domain_error for an all-zero spectrum.
int truncate_basis(const Eigen::VectorXd& eigenvalues, double threshold = 0.9995);

// ---------------------------------------------------------------------------
// Polynomial chaos
// ---------------------------------------------------------------------------

using MultiIndex = std::vector<int>;

/// Legendre polynomial of degree n normalised to unit variance under the
/// uniform law on [-1, 1].
double legendre(int n, double x);

/// All multi-indices of total degree at most @p degree in @p dim variables,
/// ordered by degree then reverse-lexicographically; the constant comes first.
std::vector<MultiIndex> total_degree_set(int dim, int degree);

/// Basis matrix Psi(i, a) = prod_k psi_{alpha_k}(2 u_ik - 1).
Eigen::MatrixXd basis_matrix(const Eigen::MatrixXd& unit, const std::vector<MultiIndex>& indices);

struct PceModel {
  std::vector<MultiIndex> indices;  ///< indices[0] is the constant term
  Eigen::VectorXd coefficients;
  double loo_error = 0.0;  ///< corrected leave-one-out error, relative to Var(y)
  int max_degree = 0;
  int dimension = 0;

  double evaluate(std::span<const double> unit_x) const;
  Eigen::VectorXd evaluate(const Eigen::MatrixXd& unit) const;
  double mean() const;
  double variance() const;
};

struct LarsOptions {
  int max_degree = 5;
  int max_terms = 0;   ///< cap on selected non-constant terms, 0 = n - 2
  int patience = 40;   ///< stop after this many steps without a new best
  double degenerate_tolerance = 1e-10;
};

struct LarsDiagnostics {
  int candidates = 0;
  int steps = 0;
  int skipped = 0;             ///< candidates dropped as linearly dependent
  std::vector<double> loo_path;  ///< corrected LOO after each step, index 0 = constant only
  int selected = 0;            ///< number of terms in the returned model
};

/// Hybrid LARS: LARS orders the candidate terms, each nested active set is
/// refitted by least squares and scored by the corrected leave-one-out error,
/// and the smallest set attaining the minimum is returned.
/// @p unit is n x p in [0, 1]; @p y has length n.
PceModel fit_pce_lars(const Eigen::MatrixXd& unit, const Eigen::VectorXd& y, const LarsOptions& options = {},
                      LarsDiagnostics* diagnostics = nullptr);

/// Ordinary least squares on a fixed index set.
PceModel fit_pce_ols(const Eigen::MatrixXd& unit, const Eigen::VectorXd& y, const std::vector<MultiIndex>& indices);

// ---------------------------------------------------------------------------
// Reduced model
// ---------------------------------------------------------------------------

struct RomOptions {
  double threshold = 0.9995;
  LarsOptions lars;
  int workers = 1;
};

struct RomModel {
  PcaBasis basis;  ///< truncated to the retained modes
  std::vector<PceModel> pce;
  doe::ParameterSpace space;
  double explained = 0.0;   ///< variance fraction of the retained modes
  double threshold = 0.0;
  double total_variance = 0.0;  ///< sum of all eigenvalues before truncation
  std::vector<double> times;

  int modes() const { return static_cast<int>(pce.size()); }
  /// Throws std::domain_error when x lies outside the parameter box.
  Eigen::VectorXd predict(std::span<const double> x) const;
  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd predict_scores(std::span<const double> x) const;
};

/// Fits PCA on @p snapshots (n x T, rows matching the design) and one PCE per
/// retained mode.
RomModel build_rom(const doe::Design& design, const Eigen::MatrixXd& snapshots, const RomOptions& options = {},
                   std::vector<double> times = {});

/// Predictivity coefficient per time column. Entries with zero spread in the
/// validation outputs are NaN.
Eigen::VectorXd q2(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& observed);
Eigen::VectorXd q2(const RomModel& rom, const Eigen::MatrixXd& x_val, const Eigen::MatrixXd& y_val);

/// Mean of the finite entries.
double mean_finite(const Eigen::VectorXd& v);

void save_rom(const std::filesystem::path& path, const RomModel& rom);
RomModel load_rom(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Snapshot files
// ---------------------------------------------------------------------------

struct Snapshots {
  Eigen::MatrixXd values;  ///< n x T
  std::vector<double> times;
  std::string gauge;
  std::string design;  ///< design file the rows belong to
};

/// CSV with one column per time (header `t<seconds>`) and a JSON sidecar at
/// `<path>.json`.
void write_snapshots(const std::filesystem::path& path, const Snapshots& s);
Snapshots read_snapshots(const std::filesystem::path& path);

}  // namespace hydrocal::rom
