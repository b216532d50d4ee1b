/// @file design_io.cpp
/// @brief Parameter spaces, scaling and design files.

#include "hydrocal/csv.hpp"
#include "hydrocal/doe.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace hydrocal::doe {

void ParameterSpace::validate() const {
  if (names.empty()) throw std::invalid_argument("parameter space is empty");
  if (names.size() != bounds.size()) throw std::invalid_argument("names and bounds differ in length");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i].empty()) throw std::invalid_argument("parameter names must be non-empty");
    if (!seen.insert(names[i]).second) throw std::invalid_argument("duplicate parameter name " + names[i]);
    const auto [lo, hi] = bounds[i];
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
      throw std::invalid_argument("bounds of " + names[i] + " must be finite with lo < hi");
  }
}

ParameterSpace ParameterSpace::estuary_default() {
  ParameterSpace s;
  for (int z = 1; z <= 6; ++z) {
    s.names.push_back("Ks" + std::to_string(z));
    s.bounds.emplace_back(5.0, 115.0);
  }
  s.names.insert(s.names.end(), {"alpha", "beta", "gamma"});
  s.bounds.insert(s.bounds.end(), {{0.8, 1.2}, {0.8, 1.2}, {-1.0, 1.0}});
  return s;
}

const char* to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::Lhs: return "lhs";
    case Scheme::LhsOptimized: return "lhs-optimized";
    case Scheme::Sobol: return "sobol-sequence";
  }
  return "?";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "lhs") return Scheme::Lhs;
  if (name == "lhs-optimized") return Scheme::LhsOptimized;
  if (name == "sobol-sequence" || name == "sobol") return Scheme::Sobol;
  throw std::invalid_argument("unknown design scheme '" + name + "'");
}

Eigen::MatrixXd scale(const Eigen::MatrixXd& unit, const ParameterSpace& space) {
  space.validate();
  if (static_cast<std::size_t>(unit.cols()) != space.size())
    throw std::invalid_argument("design has " + std::to_string(unit.cols()) + " columns, space has " +
                                std::to_string(space.size()) + " parameters");
  Eigen::MatrixXd out(unit.rows(), unit.cols());
  for (Eigen::Index k = 0; k < unit.cols(); ++k) {
    const auto [lo, hi] = space.bounds[static_cast<std::size_t>(k)];
    out.col(k) = (lo + unit.col(k).array() * (hi - lo)).matrix();
  }
  return out;
}

Eigen::MatrixXd unscale(const Eigen::MatrixXd& scaled, const ParameterSpace& space) {
  space.validate();
  if (static_cast<std::size_t>(scaled.cols()) != space.size())
    throw std::invalid_argument("matrix has " + std::to_string(scaled.cols()) + " columns, space has " +
                                std::to_string(space.size()) + " parameters");
  Eigen::MatrixXd out(scaled.rows(), scaled.cols());
  for (Eigen::Index k = 0; k < scaled.cols(); ++k) {
    const auto [lo, hi] = space.bounds[static_cast<std::size_t>(k)];
    out.col(k) = ((scaled.col(k).array() - lo) / (hi - lo)).matrix();
  }
  return out;
}

Design scale_design(Design design, const ParameterSpace& space) {
  design.scaled = scale(design.unit, space);
  design.space = space;
  return design;
}

void write_design(const std::filesystem::path& path, const Design& design) {
  if (design.space.names.empty() || design.scaled.rows() != design.unit.rows())
    throw std::invalid_argument("design must be scaled before it is written");
  {
    csv::Writer w(path);
    w.header(design.space.names);
    std::vector<double> row(static_cast<std::size_t>(design.cols()));
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
      for (Eigen::Index k = 0; k < design.cols(); ++k) row[static_cast<std::size_t>(k)] = design.scaled(i, k);
      w.numbers(row);
    }
  }
  nlohmann::ordered_json meta;
  meta["scheme"] = to_string(design.scheme);
  meta["seed"] = design.seed;
  meta["rows"] = design.rows();
  meta["names"] = design.space.names;
  auto bounds = nlohmann::json::array();
  for (const auto& [lo, hi] : design.space.bounds) bounds.push_back({lo, hi});
  meta["bounds"] = bounds;
  std::ofstream side(path.string() + ".json", std::ios::binary);
  side << meta.dump(2) << '\n';
}

Design read_design(const std::filesystem::path& path) {
  const auto side_path = std::filesystem::path(path.string() + ".json");
  std::ifstream side(side_path);
  if (!side) throw std::runtime_error("missing design sidecar " + side_path.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(side);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(side_path.string() + ": " + e.what());
  }
  Design d;
  try {
    d.scheme = scheme_from_string(meta.at("scheme").get<std::string>());
    d.seed = meta.at("seed").get<std::uint64_t>();
    d.space.names = meta.at("names").get<std::vector<std::string>>();
    for (const auto& b : meta.at("bounds")) d.space.bounds.emplace_back(b.at(0).get<double>(), b.at(1).get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(side_path.string() + ": " + e.what());
  }
  d.space.validate();

  const auto table = csv::read(path);
  if (table.header != d.space.names) throw std::runtime_error(path.string() + ": header does not match the sidecar");
  d.scaled.resize(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(d.space.size()));
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    for (std::size_t k = 0; k < d.space.size(); ++k)
      d.scaled(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          csv::to_double(table.rows[i][k], d.space.names[k]);
  d.unit = unscale(d.scaled, d.space);
  return d;
}

}  // namespace hydrocal::doe
