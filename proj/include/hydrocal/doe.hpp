/// @file doe.hpp
/// @brief Experimental designs on uniform boxes.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace hydrocal::doe {

/// Product of uniform intervals, one per named parameter.
struct ParameterSpace {
  std::vector<std::string> names;
  std::vector<std::pair<double, double>> bounds;

  std::size_t size() const { return names.size(); }
  /// Throws std::invalid_argument for empty, non-finite or inverted bounds.
  void validate() const;

  /// Six Strickler zones on [5, 115], tidal range and velocity factors on
  /// [0.8, 1.2] and a sea-level offset on [-1, 1].
  static ParameterSpace estuary_default();
};

enum class Scheme { Lhs, LhsOptimized, Sobol };

const char* to_string(Scheme scheme);
Scheme scheme_from_string(const std::string& name);

struct Design {
  Eigen::MatrixXd unit;    ///< n x p, entries in [0, 1)
  Eigen::MatrixXd scaled;  ///< n x p in physical units, empty until scaled
  ParameterSpace space;    ///< empty until scaled
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::Lhs;

  Eigen::Index rows() const { return unit.rows(); }
  Eigen::Index cols() const { return unit.cols(); }
};

/// Latin hypercube: each column has one point in every stratum [k/n, (k+1)/n).
Design lhs(int n, int p, std::uint64_t seed);

/// True when every column of @p unit has exactly one entry per stratum.
bool is_latin(const Eigen::MatrixXd& unit);

/// Squared centered L2 discrepancy (Hickernell 1998).
double centered_l2_discrepancy(const Eigen::MatrixXd& unit);

struct AnnealingOptions {
  int iterations = 10000;
  double final_temperature_ratio = 1e-3;  ///< T_end / T_0 of the geometric schedule
  int calibration_swaps = 100;            ///< swaps used to estimate T_0
};

struct AnnealingReport {
  double initial = 0.0;
  double final = 0.0;
  int accepted = 0;
  int improved = 0;
};

/// Simulated annealing over within-column swaps. The result never has a
/// larger discrepancy than the input and is still a Latin hypercube.
Design optimize_lhs(const Design& design, int iterations, std::uint64_t seed,
                    AnnealingReport* report = nullptr);
Design optimize_lhs(const Design& design, const AnnealingOptions& options, std::uint64_t seed,
                    AnnealingReport* report = nullptr);

/// Highest dimension supported by the embedded direction numbers.
int sobol_max_dimension();

/// First n points of the unscrambled Sobol sequence, skipping the origin.
Design sobol_sequence(int n, int p);

/// Maps the unit matrix onto @p space.
Design scale_design(Design design, const ParameterSpace& space);
Eigen::MatrixXd scale(const Eigen::MatrixXd& unit, const ParameterSpace& space);
Eigen::MatrixXd unscale(const Eigen::MatrixXd& scaled, const ParameterSpace& space);

/// Writes the scaled matrix as CSV (one column per parameter name) and a JSON
/// sidecar at `<path>.json` holding scheme, seed, names and bounds.
void write_design(const std::filesystem::path& path, const Design& design);
Design read_design(const std::filesystem::path& path);

}  // namespace hydrocal::doe
