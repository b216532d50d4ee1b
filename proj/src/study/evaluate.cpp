/// @file evaluate.cpp
/// @brief Designs from the study settings and parallel model evaluation.

#include "hydrocal/study.hpp"
#include "hydrocal/csv.hpp"
#include "hydrocal/parallel.hpp"

#include <chrono>
#include <cstring>

namespace hydrocal::study {

std::size_t RunLedger::completed() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.ok ? 1 : 0;
  return n;
}

doe::Design make_design(const StudyConfig& config, std::uint64_t seed, int n) {
  if (n <= 0) n = config.doe.n;
  const int p = static_cast<int>(config.parameters.size());
  doe::Design d;
  switch (config.doe.scheme) {
    case doe::Scheme::Lhs: d = doe::lhs(n, p, seed); break;
    case doe::Scheme::LhsOptimized:
      d = doe::optimize_lhs(doe::lhs(n, p, seed), config.doe.anneal_iterations, seed);
      break;
    case doe::Scheme::Sobol: d = doe::sobol_sequence(n, p); break;
  }
  return doe::scale_design(std::move(d), config.space());
}

swe::GaugeRecord run_point(const StudyConfig& config, std::span<const double> x, const std::filesystem::path& case_path) {
  if (x.size() != config.parameters.size()) throw std::invalid_argument("parameter vector has the wrong size");
  sim::SimApi api;
  const auto bindings = config.bindings();
  return sim::run_workflow(api, case_path.empty() ? config.case_path : case_path, bindings, x);
}

namespace {

std::uint64_t checksum(const swe::GaugeRecord& rec) {
  std::uint64_t h = fnv1a64({});
  for (const auto& s : rec.series)
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(s.data()), s.size() * sizeof(double)), h);
  return h;
}

}  // namespace

Evaluation evaluate_doe(const StudyConfig& config, const doe::Design& design, int workers, FailureMode mode,
                        const std::filesystem::path& case_path) {
  if (design.scaled.rows() == 0 || design.scaled.cols() != static_cast<Eigen::Index>(config.parameters.size()))
    throw std::invalid_argument("design must be scaled over the study parameters");
  const auto n = static_cast<std::size_t>(design.scaled.rows());
  const auto path = case_path.empty() ? config.case_path : case_path;
  const auto bindings = config.bindings();

  sim::SimApi api;
  std::vector<std::optional<swe::GaugeRecord>> records(n);
  Evaluation ev;
  ev.ledger.seed = design.seed;
  ev.ledger.version = version();
  ev.ledger.rows.resize(n);

  parallel_for(n, workers, [&](std::size_t i) {
    auto& row = ev.ledger.rows[i];
    row.row = static_cast<int>(i);
    const Eigen::VectorXd x = design.scaled.row(static_cast<Eigen::Index>(i)).transpose();
    const auto t0 = std::chrono::steady_clock::now();
    try {
      records[i] = sim::run_workflow(api, path, bindings, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
      row.ok = true;
      row.checksum = checksum(*records[i]);
    } catch (const std::exception& e) {
      row.message = e.what();
    }
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  if (mode == FailureMode::Strict && ev.ledger.completed() != n) {
    std::size_t first = 0;
    while (ev.ledger.rows[first].ok) ++first;
    throw EvaluationFailed(std::to_string(n - ev.ledger.completed()) + " of " + std::to_string(n) +
                               " design rows failed; first failure at row " + std::to_string(first) + ": " +
                               ev.ledger.rows[first].message,
                           ev.ledger);
  }
  if (ev.ledger.completed() == 0) throw EvaluationFailed("every design row failed", ev.ledger);

  for (std::size_t i = 0; i < n; ++i)
    if (records[i]) ev.rows.push_back(static_cast<int>(i));
  const auto& first = *records[static_cast<std::size_t>(ev.rows.front())];
  ev.times = first.times;
  const auto t = static_cast<Eigen::Index>(first.times.size());
  ev.gauges.assign(first.series.size(), Eigen::MatrixXd(static_cast<Eigen::Index>(ev.rows.size()), t));
  for (std::size_t r = 0; r < ev.rows.size(); ++r) {
    const auto& rec = *records[static_cast<std::size_t>(ev.rows[r])];
    for (std::size_t g = 0; g < rec.series.size(); ++g)
      for (Eigen::Index j = 0; j < t; ++j) ev.gauges[g](static_cast<Eigen::Index>(r), j) = rec.series[g][static_cast<std::size_t>(j)];
  }
  return ev;
}

void write_ledger_csv(const std::filesystem::path& path, const RunLedger& ledger) {
  csv::Writer w(path);
  w.header(std::vector<std::string>{"row", "status", "checksum", "message"});
  for (const auto& r : ledger.rows) {
    std::string msg = r.message;
    for (auto& c : msg)
      if (c == ',' || c == '\n' || c == '\r') c = ' ';
    w.row({std::to_string(r.row), r.ok ? "ok" : "failed", r.ok ? hex64(r.checksum) : "", msg});
  }
}

std::vector<std::size_t> analysed_gauges(const StudyConfig& config) {
  const auto count = sim::parse_case_file(config.case_path).gauges.size();
  std::vector<std::size_t> out;
  if (config.gauges.empty()) {
    for (std::size_t g = 0; g < count; ++g) out.push_back(g);
    return out;
  }
  for (const auto& s : config.gauges) {
    const auto g = assim::station_index(s);
    if (g >= count) throw ConfigError("station " + s + " is not among the " + std::to_string(count) + " case gauges");
    out.push_back(g);
  }
  return out;
}

}  // namespace hydrocal::study
