/// @file indices.cpp
/// @brief Per-mode and generalized Sobol indices, repetitions, convergence.

#include "hydrocal/gsa.hpp"
#include "hydrocal/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace hydrocal::gsa {

ModeIndices pce_sobol(const rom::PceModel& pce) {
  const auto p = static_cast<Eigen::Index>(pce.dimension);
  if (static_cast<Eigen::Index>(pce.indices.size()) != pce.coefficients.size())
    throw std::invalid_argument("expansion has mismatched indices and coefficients");
  ModeIndices m;
  m.first = Eigen::VectorXd::Zero(p);
  m.total = Eigen::VectorXd::Zero(p);
  m.second = Eigen::MatrixXd::Zero(p, p);

  std::vector<Eigen::Index> support;
  for (std::size_t a = 0; a < pce.indices.size(); ++a) {
    const auto& alpha = pce.indices[a];
    if (static_cast<Eigen::Index>(alpha.size()) != p) throw std::invalid_argument("multi-index dimension mismatch");
    support.clear();
    for (Eigen::Index k = 0; k < p; ++k)
      if (alpha[static_cast<std::size_t>(k)] > 0) support.push_back(k);
    if (support.empty()) continue;
    const double c2 = pce.coefficients(static_cast<Eigen::Index>(a)) * pce.coefficients(static_cast<Eigen::Index>(a));
    m.variance += c2;
    for (auto k : support) m.total(k) += c2;
    if (support.size() == 1) m.first(support[0]) += c2;
    if (support.size() == 2) {
      m.second(support[0], support[1]) += c2;
      m.second(support[1], support[0]) += c2;
    }
  }
  if (!(m.variance > 0.0)) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    m.first.setConstant(nan);
    m.total.setConstant(nan);
    m.second.setConstant(nan);
    m.defined = false;
    return m;
  }
  m.first /= m.variance;
  m.total /= m.variance;
  m.second /= m.variance;
  m.defined = true;
  return m;
}

GeneralizedIndices generalized_indices(const std::vector<ModeIndices>& modes, const Eigen::VectorXd& lambda) {
  if (modes.empty()) throw std::invalid_argument("no modes to aggregate");
  if (static_cast<Eigen::Index>(modes.size()) != lambda.size())
    throw std::invalid_argument("mode count does not match the eigenvalue count");
  const auto p = modes.front().first.size();
  GeneralizedIndices g;
  g.weights = Eigen::VectorXd::Zero(lambda.size());
  double wsum = 0.0;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    if (modes[k].first.size() != p) throw std::invalid_argument("modes disagree on the parameter count");
    if (lambda(static_cast<Eigen::Index>(k)) < 0.0) throw std::invalid_argument("negative eigenvalue");
    if (!modes[k].defined) {
      g.dropped.push_back(static_cast<int>(k));
      continue;
    }
    g.weights(static_cast<Eigen::Index>(k)) = lambda(static_cast<Eigen::Index>(k));
    wsum += lambda(static_cast<Eigen::Index>(k));
  }
  if (!(wsum > 0.0)) throw std::invalid_argument("every mode has zero variance or zero weight");
  g.weights /= wsum;

  g.first = Eigen::VectorXd::Zero(p);
  g.total = Eigen::VectorXd::Zero(p);
  g.second = Eigen::MatrixXd::Zero(p, p);
  double pce_var = 0.0;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const double w = g.weights(static_cast<Eigen::Index>(k));
    if (!modes[k].defined) continue;
    g.first += w * modes[k].first;
    g.total += w * modes[k].total;
    g.second += w * modes[k].second;
    pce_var += modes[k].variance;
  }
  g.variance_ratio = pce_var / wsum;
  return g;
}

GeneralizedIndices generalized_indices(const rom::RomModel& rom) {
  std::vector<ModeIndices> modes;
  modes.reserve(rom.pce.size());
  for (const auto& m : rom.pce) modes.push_back(pce_sobol(m));
  return generalized_indices(modes, rom.basis.eigenvalues.head(rom.modes()));
}

IndexIntervals min_max(const std::vector<GeneralizedIndices>& runs) {
  if (runs.empty()) throw std::invalid_argument("no runs to summarise");
  IndexIntervals iv;
  iv.first_min = iv.first_max = runs.front().first;
  iv.total_min = iv.total_max = runs.front().total;
  for (const auto& r : runs) {
    if (r.first.size() != iv.first_min.size()) throw std::invalid_argument("runs disagree on the parameter count");
    iv.first_min = iv.first_min.cwiseMin(r.first);
    iv.first_max = iv.first_max.cwiseMax(r.first);
    iv.total_min = iv.total_min.cwiseMin(r.total);
    iv.total_max = iv.total_max.cwiseMax(r.total);
  }
  iv.runs = runs;
  return iv;
}

IndexIntervals gsi_confidence(const std::vector<std::uint64_t>& seeds,
                              const std::function<GeneralizedIndices(std::uint64_t)>& job, int workers) {
  if (seeds.size() < 2) throw std::invalid_argument("at least two repetitions are needed");
  std::vector<std::uint64_t> order = seeds;
  std::stable_sort(order.begin(), order.end());
  std::vector<std::optional<GeneralizedIndices>> results(order.size());
  std::vector<std::string> errors(order.size());
  parallel_for(order.size(), workers, [&](std::size_t i) {
    try {
      results[i] = job(order[i]);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  std::vector<GeneralizedIndices> ok;
  std::vector<std::uint64_t> ok_seeds;
  std::vector<RepetitionFailure> failures;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (results[i]) {
      ok.push_back(std::move(*results[i]));
      ok_seeds.push_back(order[i]);
    } else {
      failures.push_back({order[i], errors[i].empty() ? "unknown failure" : errors[i]});
    }
  }
  if (ok.empty()) throw std::runtime_error("every repetition failed; first seed " + std::to_string(order.front()) +
                                           ": " + failures.front().message);
  auto iv = min_max(ok);
  iv.seeds = std::move(ok_seeds);
  iv.failures = std::move(failures);
  return iv;
}

ConvergenceTable convergence_study(const std::vector<int>& sizes, const std::function<GeneralizedIndices(int)>& job,
                                   std::string nesting, int workers, double tolerance) {
  if (sizes.empty()) throw std::invalid_argument("no sample sizes given");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 2) throw std::invalid_argument("sample sizes must be at least 2");
    if (i && sizes[i] <= sizes[i - 1]) throw std::invalid_argument("sample sizes must be strictly increasing");
  }
  ConvergenceTable table;
  table.nesting = std::move(nesting);
  table.rows.resize(sizes.size());
  parallel_for(sizes.size(), workers, [&](std::size_t i) {
    table.rows[i].n = sizes[i];
    table.rows[i].gsi = job(sizes[i]);
  });
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    auto& row = table.rows[i];
    if (i == 0) {
      row.change = std::numeric_limits<double>::infinity();
      continue;
    }
    const auto& prev = table.rows[i - 1].gsi;
    row.change = std::max((row.gsi.first - prev.first).cwiseAbs().maxCoeff(),
                          (row.gsi.total - prev.total).cwiseAbs().maxCoeff());
    row.stabilized = row.change < tolerance;
  }
  return table;
}

}  // namespace hydrocal::gsa
