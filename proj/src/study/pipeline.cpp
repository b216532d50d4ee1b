/// @file pipeline.cpp
/// @brief Reduced models, sensitivity, calibration and the twin experiment.

#include "hydrocal/study.hpp"
#include "hydrocal/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

namespace hydrocal::study {

doe::Design subset_rows(const doe::Design& d, const std::vector<int>& rows) {
  if (rows.size() == static_cast<std::size_t>(d.rows())) return d;
  doe::Design s = d;
  s.unit.resize(static_cast<Eigen::Index>(rows.size()), d.cols());
  s.scaled.resize(static_cast<Eigen::Index>(rows.size()), d.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    s.unit.row(static_cast<Eigen::Index>(r)) = d.unit.row(rows[r]);
    s.scaled.row(static_cast<Eigen::Index>(r)) = d.scaled.row(rows[r]);
  }
  return s;
}

rom::RomModel fit_rom(const StudyConfig& config, const doe::Design& design, const Eigen::MatrixXd& snapshots,
                      const std::vector<double>& times, int workers) {
  rom::RomOptions opt;
  opt.threshold = config.rom.threshold;
  opt.lars.max_degree = config.rom.max_degree;
  opt.workers = workers;
  return rom::build_rom(design, snapshots, opt, times);
}

std::vector<gsa::GeneralizedIndices> repetition_indices(const StudyConfig& config, std::uint64_t seed, int n,
                                                        const std::vector<std::size_t>& gauges, int workers) {
  const auto design = make_design(config, seed, n);
  const auto ev = evaluate_doe(config, design, workers);
  std::vector<gsa::GeneralizedIndices> out;
  for (auto g : gauges)
    out.push_back(gsa::generalized_indices(fit_rom(config, design, ev.gauges[g], ev.times, workers)));
  return out;
}

void extend_gsa(const StudyConfig& config, std::uint64_t seed, std::vector<GaugeAnalysis>& analyses, int workers) {
  const auto gauges = analysed_gauges(config);
  if (gauges.size() != analyses.size()) throw std::invalid_argument("one analysis per analysed gauge expected");

  if (config.gsa.repetitions >= 2) {
    std::vector<std::uint64_t> seeds{derive_seed(seed, Stream::Doe)};
    for (int r = 1; r < config.gsa.repetitions; ++r)
      seeds.push_back(derive_seed(seed, Stream::Repetition, static_cast<std::uint64_t>(r)));
    std::vector<std::vector<gsa::GeneralizedIndices>> runs(seeds.size());
    std::vector<std::string> errors(seeds.size());
    for (std::size_t g = 0; g < analyses.size(); ++g) runs[0].push_back(analyses[g].gsi);
    parallel_for(seeds.size() - 1, workers, [&](std::size_t i) {
      try {
        runs[i + 1] = repetition_indices(config, seeds[i + 1], config.doe.n, gauges, 1);
      } catch (const std::exception& e) {
        errors[i + 1] = e.what();
      }
    });
    for (std::size_t g = 0; g < analyses.size(); ++g) {
      std::map<std::uint64_t, std::size_t> at;
      for (std::size_t i = 0; i < seeds.size(); ++i) at[seeds[i]] = i;
      analyses[g].intervals = gsa::gsi_confidence(seeds, [&](std::uint64_t s) {
        const auto i = at.at(s);
        if (!errors[i].empty()) throw std::runtime_error(errors[i]);
        return runs[i][g];
      });
    }
  }

  if (!config.gsa.convergence_sizes.empty()) {
    const auto& sizes = config.gsa.convergence_sizes;
    std::vector<std::vector<gsa::GeneralizedIndices>> runs(sizes.size());
    const auto doe_seed = derive_seed(seed, Stream::Doe);
    parallel_for(sizes.size(), workers, [&](std::size_t i) {
      runs[i] = repetition_indices(config, doe_seed, sizes[i], gauges, 1);
    });
    const std::string nesting = config.doe.scheme == doe::Scheme::Sobol
                                    ? "nested Sobol prefixes"
                                    : "independent designs sharing the DoE seed";
    for (std::size_t g = 0; g < analyses.size(); ++g) {
      std::map<int, std::size_t> at;
      for (std::size_t i = 0; i < sizes.size(); ++i) at[sizes[i]] = i;
      analyses[g].convergence =
          gsa::convergence_study(sizes, [&](int n) { return runs[at.at(n)][g]; }, nesting);
    }
  }
}

std::vector<std::string> rank_by_total(const std::vector<std::string>& names,
                                       const std::vector<gsa::GeneralizedIndices>& gsi) {
  if (gsi.empty()) throw std::invalid_argument("no sensitivity results to rank");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(names.size()));
  for (const auto& s : gsi) {
    if (s.total.size() != mean.size()) throw std::invalid_argument("index count does not match the names");
    mean += s.total;
  }
  std::vector<std::size_t> order(names.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return mean(static_cast<Eigen::Index>(a)) > mean(static_cast<Eigen::Index>(b));
  });
  std::vector<std::string> out;
  for (auto k : order) out.push_back(names[k]);
  return out;
}

std::vector<std::string> calibration_parameters(const StudyConfig& config, const std::vector<std::string>& ranking) {
  if (!config.calibration.parameters.empty()) return config.calibration.parameters;
  const auto k = static_cast<std::size_t>(config.calibration.count);
  if (ranking.size() < k) throw ConfigError("fewer ranked parameters than calibration.count");
  return {ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(k)};
}

assim::CalibrationReport run_calibration(const StudyConfig& config, const std::vector<std::string>& free_names,
                                         const std::vector<double>& reference,
                                         const std::vector<assim::Observation>& observations, int workers,
                                         const std::vector<double>& r_diag) {
  if (reference.size() != config.parameters.size()) throw std::invalid_argument("reference values have the wrong size");
  const auto& cal = config.calibration;
  assim::CalibrationSetup s;
  s.case_path = config.observation_case();
  s.bindings = config.bindings();
  s.nominal = reference;
  for (std::size_t i = 0; i < free_names.size(); ++i) {
    const auto k = config.parameter_index(free_names[i]);
    s.free.push_back(k);
    s.bounds.emplace_back(config.parameters[k].lo, config.parameters[k].hi);
    const auto it = cal.x0.find(free_names[i]);
    s.x0.push_back(it == cal.x0.end() ? reference[k] : it->second);
  }
  for (std::size_t i = 0; i < s.x0.size(); ++i)
    if (!(s.x0[i] >= s.bounds[i].first && s.x0[i] <= s.bounds[i].second))
      throw ConfigError("calibration.x0 value for '" + free_names[i] + "' lies outside its bounds");
  s.observations = observations;
  s.r_diag = r_diag;
  s.options.bfgs.f_rel_tol = cal.relative_reduction;
  s.options.bfgs.max_iter = cal.max_iterations;
  s.options.bfgs.grad_tol = cal.gradient_tolerance;
  s.options.gradient.increment = cal.increment;
  s.options.gradient.scheme = cal.scheme;
  s.options.gradient.space = cal.space;
  s.options.gradient.workers = workers;
  sim::SimApi api;
  return assim::calibrate(api, s);
}

double TwinReport::min_q2() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& a : analyses) m = std::min(m, a.q2_mean);
  return m;
}

std::vector<assim::Observation> synthesize_observations(const StudyConfig& config, std::span<const double> x_true,
                                                        std::uint64_t noise_seed, bool noise,
                                                        std::vector<double>* variances) {
  const auto rec = run_point(config, x_true, config.observation_case());
  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<assim::Observation> obs;
  if (variances) variances->clear();
  for (std::size_t g = 0; g < rec.series.size(); ++g)
    for (std::size_t i = 0; i < rec.times.size(); ++i) {
      const double v = rec.series[g][i];
      const double var = std::max(0.1 * std::abs(v), 1e-6);
      const double sd = std::sqrt(var);
      if (variances) variances->push_back(var);
      const double e = normal(rng);
      obs.push_back({assim::station_name(g), rec.times[i], noise ? v + sd * e : v});
    }
  return obs;
}

TwinReport twin_experiment(const StudyConfig& config, std::uint64_t seed, int workers, bool noise) {
  if (!config.twin) throw ConfigError("the study file has no 'twin' section");
  TwinReport r;
  r.names = config.names();
  r.x_true = config.twin->x_true;

  r.design = make_design(config, derive_seed(seed, Stream::Doe));
  r.evaluation = evaluate_doe(config, r.design, workers);
  const auto p = static_cast<int>(config.parameters.size());
  if (config.rom.validation_n >= 2)
    r.validation = doe::scale_design(doe::lhs(config.rom.validation_n, p, derive_seed(seed, Stream::Validation)),
                                     config.space());
  Evaluation val;
  if (r.validation.rows() > 0) val = evaluate_doe(config, r.validation, workers);

  const auto gauges = analysed_gauges(config);
  std::vector<gsa::GeneralizedIndices> all;
  for (auto g : gauges) {
    GaugeAnalysis a;
    a.station = assim::station_name(g);
    a.rom = fit_rom(config, r.design, r.evaluation.gauges[g], r.evaluation.times, workers);
    if (r.validation.rows() > 0) {
      a.q2 = rom::q2(a.rom, r.validation.scaled, val.gauges[g]);
      a.q2_mean = rom::mean_finite(a.q2);
    } else {
      a.q2_mean = std::numeric_limits<double>::quiet_NaN();
    }
    a.gsi = gsa::generalized_indices(a.rom);
    all.push_back(a.gsi);
    r.analyses.push_back(std::move(a));
  }
  extend_gsa(config, seed, r.analyses, workers);
  r.ranking = rank_by_total(r.names, all);
  r.calibrated = calibration_parameters(config, r.ranking);

  std::vector<double> r_gen;
  r.observations = synthesize_observations(config, r.x_true, derive_seed(seed, Stream::Noise), noise, &r_gen);
  if (config.twin->covariance == TwinSettings::Covariance::Observed) r_gen.clear();
  r.calibration = run_calibration(config, r.calibrated, r.x_true, r.observations, workers, r_gen);
  for (std::size_t i = 0; i < r.calibrated.size(); ++i) {
    const auto& spec = config.parameters[config.parameter_index(r.calibrated[i])];
    r.recovery_error.push_back(std::abs(r.calibration.x_map(static_cast<Eigen::Index>(i)) -
                                        r.x_true[config.parameter_index(r.calibrated[i])]) /
                               (spec.hi - spec.lo));
  }
  return r;
}

}  // namespace hydrocal::study
