/// @file gsa.hpp
/// @brief Sobol indices from polynomial chaos coefficients and their
/// eigenvalue-weighted aggregation over PCA modes.
#pragma once

#include "hydrocal/rom.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hydrocal::gsa {

struct ModeIndices {
  Eigen::VectorXd first;   ///< length p
  Eigen::VectorXd total;   ///< length p
  Eigen::MatrixXd second;  ///< p x p, symmetric, zero diagonal
  double variance = 0.0;
  /// False for a zero-variance mode; the index vectors are then NaN.
  bool defined = false;
};

/// Closed-form Sobol indices of an orthonormal expansion.
ModeIndices pce_sobol(const rom::PceModel& pce);

struct GeneralizedIndices {
  Eigen::VectorXd first;
  Eigen::VectorXd total;
  Eigen::MatrixXd second;
  Eigen::VectorXd weights;       ///< normalised weights actually applied, 0 for dropped modes
  std::vector<int> dropped;      ///< modes excluded for zero variance
  double variance_ratio = 0.0;   ///< sum of PCE mode variances over sum of weights
};

/// Weighted averages of per-mode indices with weights lambda_k / sum(lambda).
/// Undefined modes are dropped and the remaining weights renormalised.
/// Throws std::invalid_argument on size mismatch or when no mode remains.
GeneralizedIndices generalized_indices(const std::vector<ModeIndices>& modes, const Eigen::VectorXd& lambda);

/// Per-mode indices of every expansion of @p rom, aggregated with its eigenvalues.
GeneralizedIndices generalized_indices(const rom::RomModel& rom);

// ---------------------------------------------------------------------------
// Repetitions and convergence
// ---------------------------------------------------------------------------

struct RepetitionFailure {
  std::uint64_t seed = 0;
  std::string message;
};

struct IndexIntervals {
  Eigen::VectorXd first_min, first_max;
  Eigen::VectorXd total_min, total_max;
  std::vector<std::uint64_t> seeds;     ///< seeds of the successful runs, sorted
  std::vector<GeneralizedIndices> runs;  ///< in seed order
  std::vector<RepetitionFailure> failures;
  bool partial() const { return !failures.empty(); }
};

/// Min-max envelope of a set of index estimates.
IndexIntervals min_max(const std::vector<GeneralizedIndices>& runs);

/// Runs @p job once per seed on up to @p workers threads and reduces the
/// results in seed order. A failing job is recorded with its seed.
/// Throws std::invalid_argument for fewer than two seeds and
/// std::runtime_error when every repetition fails.
IndexIntervals gsi_confidence(const std::vector<std::uint64_t>& seeds,
                              const std::function<GeneralizedIndices(std::uint64_t)>& job, int workers = 1);

struct ConvergenceRow {
  int n = 0;
  GeneralizedIndices gsi;
  double change = 0.0;     ///< max |delta| of first and total indices versus the previous row
  bool stabilized = false; ///< change below the tolerance
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  std::string nesting;  ///< how the designs of successive sizes relate
};

/// Throws std::invalid_argument unless @p sizes is strictly increasing.
ConvergenceTable convergence_study(const std::vector<int>& sizes, const std::function<GeneralizedIndices(int)>& job,
                                   std::string nesting, int workers = 1, double tolerance = 0.01);

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

/// Chord-graph data: inner circle = first order, outer circle = total order,
/// ribbons = second order. The normalised fields divide by the sum of the
/// total indices.
struct ChordGraph {
  std::vector<std::string> names;
  Eigen::VectorXd first, total;
  Eigen::MatrixXd second;
  Eigen::VectorXd inner, outer;
  Eigen::MatrixXd ribbons;
};

ChordGraph chord_graph(const std::vector<std::string>& names, const GeneralizedIndices& gsi);
std::string chord_graph_json(const ChordGraph& g);
ChordGraph parse_chord_graph(const std::string& json_text);

/// `parameter,first,total` plus `first_min,first_max,total_min,total_max`
/// when intervals are given.
void write_gsi_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                   const GeneralizedIndices& gsi, const IndexIntervals* intervals = nullptr);

/// Writes the convergence table as CSV, one row per sample size.
void write_convergence_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                           const ConvergenceTable& table);

}  // namespace hydrocal::gsa
