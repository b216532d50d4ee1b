/// @file study.hpp
/// @brief Study configuration, parallel DoE evaluation, the pipeline stages
/// and the twin experiment.
#pragma once

#include "hydrocal/assim.hpp"
#include "hydrocal/doe.hpp"
#include "hydrocal/gsa.hpp"
#include "hydrocal/rom.hpp"
#include "hydrocal/sim_api.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hydrocal::study {

inline constexpr int kSchemaVersion = 1;

/// Release string, e.g. "1.0.0".
const char* version();

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

/// Independent stream seeds derived from the study seed (splitmix64 mix).
enum class Stream : std::uint64_t { Doe = 0, Validation = 1, Noise = 2, Repetition = 16 };
std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index = 0);

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParameterSpec {
  std::string name;
  std::string keyword;
  std::optional<int> zone;
  double lo = 0.0, hi = 0.0;
  double nominal = 0.0;
};

struct DoeSettings {
  int n = 256;
  doe::Scheme scheme = doe::Scheme::LhsOptimized;
  int anneal_iterations = 2000;
};

struct RomSettings {
  double threshold = 0.9995;
  int max_degree = 3;
  int validation_n = 64;
};

struct GsaSettings {
  int repetitions = 0;                 ///< 0 or 1 disables intervals
  std::vector<int> convergence_sizes;  ///< empty disables the convergence study
};

struct CalibrationSettings {
  std::vector<std::string> parameters;  ///< empty: the top `count` by total GSI
  int count = 5;
  std::map<std::string, double> x0;     ///< prior mean by name; missing entries use the reference values
  double increment = 1e-4;
  assim::DifferenceScheme scheme = assim::DifferenceScheme::Forward;
  assim::IncrementSpace space = assim::IncrementSpace::Unit;
  int max_iterations = 100;
  double gradient_tolerance = 1e-5;
  double relative_reduction = 2.2e-9;  ///< stop when a step lowers J by less than this fraction
  std::optional<std::filesystem::path> observations;
  std::optional<std::filesystem::path> case_path;  ///< observation-grid case, defaults to the study case
};

struct TwinSettings {
  std::vector<double> x_true;  ///< one per parameter
  /// Observation variances used by the calibration: those that generated the
  /// noise, or max(0.1 |Y|, 1e-6) recomputed from the noisy observations.
  enum class Covariance { Generating, Observed } covariance = Covariance::Generating;
};

struct StudyConfig {
  std::filesystem::path source;
  std::string hash;  ///< FNV-1a of the config bytes, hex
  std::filesystem::path case_path;
  std::vector<ParameterSpec> parameters;
  std::vector<std::string> gauges;  ///< stations analysed by rom-fit and gsa; empty: all
  std::uint64_t seed = 1;
  int workers = 1;
  DoeSettings doe;
  RomSettings rom;
  GsaSettings gsa;
  CalibrationSettings calibration;
  std::optional<TwinSettings> twin;

  doe::ParameterSpace space() const;
  std::vector<sim::ParameterBinding> bindings() const;
  std::vector<double> nominal() const;
  std::vector<std::string> names() const;
  std::size_t parameter_index(const std::string& name) const;  ///< throws ConfigError
  std::filesystem::path observation_case() const;
};

/// Reads a YAML study file. Relative paths resolve against its directory.
/// Throws ConfigError with the offending key in the message.
StudyConfig load_config(const std::filesystem::path& path);
StudyConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                         const std::filesystem::path& source = {});

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

enum class FailureMode { Strict, Permissive };

struct LedgerRow {
  int row = 0;
  bool ok = false;
  double wall_seconds = 0.0;
  std::uint64_t checksum = 0;  ///< FNV-1a over the row's recorded values
  std::string message;
};

struct RunLedger {
  std::vector<LedgerRow> rows;
  std::uint64_t seed = 0;
  std::string version;
  std::size_t completed() const;
};

struct Evaluation {
  std::vector<int> rows;  ///< design rows present in the matrices
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> gauges;  ///< per gauge: rows.size() x T
  RunLedger ledger;
};

class EvaluationFailed : public std::runtime_error {
 public:
  EvaluationFailed(const std::string& what, RunLedger ledger) : std::runtime_error(what), ledger_(std::move(ledger)) {}
  const RunLedger& ledger() const { return ledger_; }

 private:
  RunLedger ledger_;
};

/// Design from the study settings. Scheme and size default to the config.
doe::Design make_design(const StudyConfig& config, std::uint64_t seed, int n = 0);

/// Evaluates every design row through its own API instance. Strict mode
/// throws EvaluationFailed when any row fails; permissive mode drops failed
/// rows from the matrices.
Evaluation evaluate_doe(const StudyConfig& config, const doe::Design& design, int workers,
                        FailureMode mode = FailureMode::Strict, const std::filesystem::path& case_path = {});

/// Parameter values of one model run: nominal values with @p x over the
/// design columns.
swe::GaugeRecord run_point(const StudyConfig& config, std::span<const double> x,
                           const std::filesystem::path& case_path = {});

/// Columns `row,status,checksum,message`. Wall times go to the log.
void write_ledger_csv(const std::filesystem::path& path, const RunLedger& ledger);

/// Design restricted to the given rows, e.g. those a permissive run completed.
doe::Design subset_rows(const doe::Design& design, const std::vector<int>& rows);

/// Positions of the analysed stations in the case gauge list.
std::vector<std::size_t> analysed_gauges(const StudyConfig& config);

// ---------------------------------------------------------------------------
// Pipeline stages
// ---------------------------------------------------------------------------

rom::RomModel fit_rom(const StudyConfig& config, const doe::Design& design, const Eigen::MatrixXd& snapshots,
                      const std::vector<double>& times, int workers);

struct GaugeAnalysis {
  std::string station;
  rom::RomModel rom;
  Eigen::VectorXd q2;  ///< per record, empty when not validated
  double q2_mean = 0.0;
  gsa::GeneralizedIndices gsi;
  std::optional<gsa::IndexIntervals> intervals;
  std::optional<gsa::ConvergenceTable> convergence;
};

/// Fresh design, evaluation and reduced model for one repetition seed.
std::vector<gsa::GeneralizedIndices> repetition_indices(const StudyConfig& config, std::uint64_t seed, int n,
                                                        const std::vector<std::size_t>& gauges, int workers);

/// Adds repetition intervals and convergence tables when configured.
void extend_gsa(const StudyConfig& config, std::uint64_t seed, std::vector<GaugeAnalysis>& analyses, int workers);

/// Parameter names sorted by mean total index over the analyses, descending.
std::vector<std::string> rank_by_total(const std::vector<std::string>& names,
                                       const std::vector<gsa::GeneralizedIndices>& gsi);

/// Calibrated parameter names: the configured list or the top of @p ranking.
std::vector<std::string> calibration_parameters(const StudyConfig& config, const std::vector<std::string>& ranking);

/// 3D-Var on the observation case. @p reference supplies the values of the
/// parameters held fixed. Empty @p r_diag: R from the observations.
assim::CalibrationReport run_calibration(const StudyConfig& config, const std::vector<std::string>& free_names,
                                         const std::vector<double>& reference,
                                         const std::vector<assim::Observation>& observations, int workers,
                                         const std::vector<double>& r_diag = {});

// ---------------------------------------------------------------------------
// Twin experiment
// ---------------------------------------------------------------------------

struct TwinReport {
  std::vector<std::string> names;
  std::vector<double> x_true;
  doe::Design design;
  doe::Design validation;
  Evaluation evaluation;
  std::vector<GaugeAnalysis> analyses;
  std::vector<std::string> ranking;
  std::vector<std::string> calibrated;
  std::vector<assim::Observation> observations;
  assim::CalibrationReport calibration;
  std::vector<double> recovery_error;  ///< |x_map - x_true| / range per calibrated parameter

  double min_q2() const;
};

/// Y = G(X_true) + e with e ~ N(0, R), R = max(0.1 |G(X_true)|, 1e-6), over
/// every gauge and record of the observation case.
/// @p variances receives R.
std::vector<assim::Observation> synthesize_observations(const StudyConfig& config, std::span<const double> x_true,
                                                        std::uint64_t noise_seed, bool noise = true,
                                                        std::vector<double>* variances = nullptr);

/// DoE, evaluation, reduced models, validation, GSA, observation synthesis
/// and calibration in one go.
TwinReport twin_experiment(const StudyConfig& config, std::uint64_t seed, int workers, bool noise = true);

// ---------------------------------------------------------------------------
// Artifacts and logging
// ---------------------------------------------------------------------------

struct ArtifactMeta {
  std::string subcommand;
  std::string config_hash;
  std::uint64_t seed = 0;
};

/// Writes `<artifact>.meta.json` next to the artifact.
void write_meta(const std::filesystem::path& artifact, const ArtifactMeta& meta);

/// Collects outputs in a hidden staging directory and moves them into place
/// on commit(), so a failed command leaves the output directory untouched.
class Staging {
 public:
  explicit Staging(std::filesystem::path out_dir);
  ~Staging();
  Staging(const Staging&) = delete;
  Staging& operator=(const Staging&) = delete;

  /// Path inside the staging area for an output file name.
  std::filesystem::path path(const std::string& name);
  /// Artifact with its metadata sidecar.
  std::filesystem::path artifact(const std::string& name, const ArtifactMeta& meta);
  void commit();
  const std::filesystem::path& out_dir() const { return out_; }

 private:
  std::filesystem::path out_, stage_;
  bool created_ = false;
  bool committed_ = false;
};

std::string station_csv_name(const std::string& stem, const std::string& station, const char* ext = ".csv");

void write_twin_artifacts(Staging& stage, const ArtifactMeta& meta, const TwinReport& report);
void write_analysis_artifacts(Staging& stage, const ArtifactMeta& meta, const std::vector<std::string>& names,
                              const GaugeAnalysis& analysis);

/// Appends `timestamp level subcommand message` lines to hydrocal.log in the
/// working directory, or to $HYDROCAL_LOG.
class Log {
 public:
  explicit Log(std::string subcommand);
  void info(const std::string& message) const { write("INFO", message); }
  void warn(const std::string& message) const { write("WARN", message); }
  void error(const std::string& message) const { write("ERROR", message); }
  static std::filesystem::path location();

 private:
  void write(const char* level, const std::string& message) const;
  std::string subcommand_;
};

}  // namespace hydrocal::study
