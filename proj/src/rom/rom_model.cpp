/// @file rom_model.cpp
/// @brief PCA-PCE emulator, predictivity and persistence.

#include "hydrocal/csv.hpp"
#include "hydrocal/parallel.hpp"
#include "hydrocal/rom.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace hydrocal::rom {

RomModel build_rom(const doe::Design& design, const Eigen::MatrixXd& snapshots, const RomOptions& opt,
                   std::vector<double> times) {
  if (design.space.names.empty()) throw std::invalid_argument("design must carry its parameter space");
  if (design.rows() != snapshots.rows())
    throw std::invalid_argument("snapshot rows (" + std::to_string(snapshots.rows()) + ") do not match the design (" +
                                std::to_string(design.rows()) + ")");
  if (!times.empty() && static_cast<Eigen::Index>(times.size()) != snapshots.cols())
    throw std::invalid_argument("time stamps do not match the snapshot columns");

  const auto centered = center_columns(snapshots);
  const auto full = pca(centered.values, centered.means);
  RomModel rom;
  rom.space = design.space;
  rom.threshold = opt.threshold;
  rom.times = std::move(times);
  rom.total_variance = full.eigenvalues.sum();

  int k = 0;
  if (full.rank > 0) k = truncate_basis(full.eigenvalues, opt.threshold);
  rom.basis = full.truncated(k);
  rom.explained = rom.total_variance > 0.0 ? rom.basis.eigenvalues.sum() / rom.total_variance : 1.0;
  rom.pce.resize(static_cast<std::size_t>(k));
  parallel_for(static_cast<std::size_t>(k), opt.workers, [&](std::size_t i) {
    rom.pce[i] = fit_pce_lars(design.unit, rom.basis.scores.col(static_cast<Eigen::Index>(i)), opt.lars);
  });
  return rom;
}

Eigen::VectorXd RomModel::predict_scores(std::span<const double> x) const {
  if (x.size() != space.size()) throw std::invalid_argument("input has the wrong number of parameters");
  std::vector<double> u(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const auto [lo, hi] = space.bounds[k];
    if (!(x[k] >= lo && x[k] <= hi))
      throw std::domain_error("parameter " + space.names[k] + " = " + csv::format(x[k]) + " is outside [" +
                              csv::format(lo) + ", " + csv::format(hi) + "]");
    u[k] = (x[k] - lo) / (hi - lo);
  }
  Eigen::VectorXd h(modes());
  for (int i = 0; i < modes(); ++i) h(i) = pce[static_cast<std::size_t>(i)].evaluate(u);
  return h;
}

Eigen::VectorXd RomModel::predict(std::span<const double> x) const {
  return basis.means + basis.modes * predict_scores(x);
}

Eigen::MatrixXd RomModel::predict(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd out(x.rows(), basis.means.size());
  std::vector<double> row(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index k = 0; k < x.cols(); ++k) row[static_cast<std::size_t>(k)] = x(i, k);
    out.row(i) = predict(row).transpose();
  }
  return out;
}

Eigen::VectorXd q2(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& observed) {
  if (predicted.rows() != observed.rows() || predicted.cols() != observed.cols())
    throw std::invalid_argument("prediction and observation shapes differ");
  if (observed.rows() < 2) throw std::invalid_argument("at least two validation points are needed");
  Eigen::VectorXd q(observed.cols());
  for (Eigen::Index t = 0; t < observed.cols(); ++t) {
    const double mean = observed.col(t).mean();
    const double den = (observed.col(t).array() - mean).square().sum();
    const double num = (predicted.col(t) - observed.col(t)).squaredNorm();
    q(t) = den > 0.0 ? 1.0 - num / den : std::numeric_limits<double>::quiet_NaN();
  }
  return q;
}

Eigen::VectorXd q2(const RomModel& rom, const Eigen::MatrixXd& x_val, const Eigen::MatrixXd& y_val) {
  return q2(rom.predict(x_val), y_val);
}

double mean_finite(const Eigen::VectorXd& v) {
  double s = 0.0;
  int n = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::isfinite(v(i))) {
      s += v(i);
      ++n;
    }
  return n ? s / n : std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {

using json = nlohmann::ordered_json;

json to_array(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd from_array(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void save_rom(const std::filesystem::path& path, const RomModel& rom) {
  json j;
  j["format"] = "hydrocal-rom";
  j["version"] = 1;
  j["names"] = rom.space.names;
  auto bounds = json::array();
  for (const auto& [lo, hi] : rom.space.bounds) bounds.push_back({lo, hi});
  j["bounds"] = bounds;
  j["threshold"] = rom.threshold;
  j["explained"] = rom.explained;
  j["total_variance"] = rom.total_variance;
  j["times"] = rom.times;
  j["means"] = to_array(rom.basis.means);
  j["eigenvalues"] = to_array(rom.basis.eigenvalues);
  auto modes = json::array();
  for (Eigen::Index k = 0; k < rom.basis.modes.cols(); ++k) modes.push_back(to_array(rom.basis.modes.col(k)));
  j["modes"] = modes;
  auto pce = json::array();
  for (const auto& m : rom.pce) {
    json e;
    e["max_degree"] = m.max_degree;
    e["loo_error"] = m.loo_error;
    e["indices"] = m.indices;
    e["coefficients"] = to_array(m.coefficients);
    pce.push_back(e);
  }
  j["pce"] = pce;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

RomModel load_rom(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  RomModel rom;
  try {
    const auto j = json::parse(in);
    if (j.at("format") != "hydrocal-rom") throw std::runtime_error("not a reduced-model file");
    rom.space.names = j.at("names").get<std::vector<std::string>>();
    for (const auto& b : j.at("bounds")) rom.space.bounds.emplace_back(b.at(0).get<double>(), b.at(1).get<double>());
    rom.threshold = j.at("threshold").get<double>();
    rom.explained = j.at("explained").get<double>();
    rom.total_variance = j.at("total_variance").get<double>();
    rom.times = j.at("times").get<std::vector<double>>();
    rom.basis.means = from_array(j.at("means"));
    rom.basis.eigenvalues = from_array(j.at("eigenvalues"));
    const auto& modes = j.at("modes");
    rom.basis.modes.resize(rom.basis.means.size(), static_cast<Eigen::Index>(modes.size()));
    for (std::size_t k = 0; k < modes.size(); ++k) rom.basis.modes.col(static_cast<Eigen::Index>(k)) = from_array(modes[k]);
    rom.basis.rank = static_cast<int>((rom.basis.eigenvalues.array() > 0.0).count());
    for (const auto& e : j.at("pce")) {
      PceModel m;
      m.max_degree = e.at("max_degree").get<int>();
      m.loo_error = e.at("loo_error").get<double>();
      m.indices = e.at("indices").get<std::vector<MultiIndex>>();
      m.coefficients = from_array(e.at("coefficients"));
      m.dimension = static_cast<int>(rom.space.size());
      rom.pce.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  rom.space.validate();
  if (rom.pce.size() != static_cast<std::size_t>(rom.basis.modes.cols()))
    throw std::runtime_error(path.string() + ": mode and expansion counts differ");
  return rom;
}

// ---------------------------------------------------------------------------
// Snapshots
// ---------------------------------------------------------------------------

void write_snapshots(const std::filesystem::path& path, const Snapshots& s) {
  if (static_cast<Eigen::Index>(s.times.size()) != s.values.cols())
    throw std::invalid_argument("time stamps do not match the snapshot columns");
  {
    csv::Writer w(path);
    std::vector<std::string> header;
    for (double t : s.times) header.push_back("t" + csv::format(t));
    w.header(header);
    std::vector<double> row(static_cast<std::size_t>(s.values.cols()));
    for (Eigen::Index i = 0; i < s.values.rows(); ++i) {
      for (Eigen::Index t = 0; t < s.values.cols(); ++t) row[static_cast<std::size_t>(t)] = s.values(i, t);
      w.numbers(row);
    }
  }
  nlohmann::ordered_json meta;
  meta["gauge"] = s.gauge;
  meta["design"] = s.design;
  meta["rows"] = s.values.rows();
  meta["times"] = s.times;
  std::ofstream side(path.string() + ".json", std::ios::binary);
  side << meta.dump(2) << '\n';
}

Snapshots read_snapshots(const std::filesystem::path& path) {
  Snapshots s;
  const auto side_path = path.string() + ".json";
  std::ifstream side(side_path);
  if (!side) throw std::runtime_error("missing snapshot sidecar " + side_path);
  try {
    const auto meta = json::parse(side);
    s.gauge = meta.at("gauge").get<std::string>();
    s.design = meta.at("design").get<std::string>();
    s.times = meta.at("times").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw std::runtime_error(side_path + ": " + e.what());
  }
  const auto table = csv::read(path);
  if (table.header.size() != s.times.size())
    throw std::runtime_error(path.string() + ": column count does not match the sidecar times");
  s.values.resize(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(s.times.size()));
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    for (std::size_t t = 0; t < s.times.size(); ++t)
      s.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) =
          csv::to_double(table.rows[i][t], path.string());
  if (!s.values.allFinite()) throw std::runtime_error(path.string() + ": non-finite snapshot values");
  return s;
}

}  // namespace hydrocal::rom
