/// @file export.cpp
/// @brief Chord-graph JSON and index tables.

#include "hydrocal/csv.hpp"
#include "hydrocal/gsa.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>

namespace hydrocal::gsa {
namespace {

using json = nlohmann::ordered_json;

json to_array(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json to_rows(const Eigen::MatrixXd& m) {
  auto out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(to_array(m.row(i).transpose()));
  return out;
}

Eigen::VectorXd from_array(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd from_rows(const json& j, Eigen::Index p) {
  if (static_cast<Eigen::Index>(j.size()) != p) throw std::runtime_error("matrix has the wrong row count");
  Eigen::MatrixXd m(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const auto r = from_array(j.at(static_cast<std::size_t>(i)));
    if (r.size() != p) throw std::runtime_error("matrix has the wrong column count");
    m.row(i) = r.transpose();
  }
  return m;
}

}  // namespace

ChordGraph chord_graph(const std::vector<std::string>& names, const GeneralizedIndices& gsi) {
  const auto p = gsi.first.size();
  if (static_cast<Eigen::Index>(names.size()) != p) throw std::invalid_argument("name count does not match the indices");
  ChordGraph g;
  g.names = names;
  g.first = gsi.first;
  g.total = gsi.total;
  g.second = gsi.second;
  const double scale = gsi.total.sum();
  if (scale > 0.0) {
    g.inner = gsi.first / scale;
    g.outer = gsi.total / scale;
    g.ribbons = gsi.second / scale;
  } else {
    g.inner = Eigen::VectorXd::Zero(p);
    g.outer = Eigen::VectorXd::Zero(p);
    g.ribbons = Eigen::MatrixXd::Zero(p, p);
  }
  return g;
}

std::string chord_graph_json(const ChordGraph& g) {
  json j;
  j["format"] = "hydrocal-chord";
  j["version"] = 1;
  j["names"] = g.names;
  j["first"] = to_array(g.first);
  j["total"] = to_array(g.total);
  j["second"] = to_rows(g.second);
  j["inner"] = to_array(g.inner);
  j["outer"] = to_array(g.outer);
  j["ribbons"] = to_rows(g.ribbons);
  return j.dump(2) + "\n";
}

ChordGraph parse_chord_graph(const std::string& text) {
  try {
    const auto j = json::parse(text);
    if (j.at("format") != "hydrocal-chord") throw std::runtime_error("not a chord-graph document");
    ChordGraph g;
    g.names = j.at("names").get<std::vector<std::string>>();
    const auto p = static_cast<Eigen::Index>(g.names.size());
    g.first = from_array(j.at("first"));
    g.total = from_array(j.at("total"));
    g.inner = from_array(j.at("inner"));
    g.outer = from_array(j.at("outer"));
    if (g.first.size() != p || g.total.size() != p || g.inner.size() != p || g.outer.size() != p)
      throw std::runtime_error("vector length does not match the parameter count");
    g.second = from_rows(j.at("second"), p);
    g.ribbons = from_rows(j.at("ribbons"), p);
    return g;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("chord graph: ") + e.what());
  }
}

void write_gsi_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                   const GeneralizedIndices& gsi, const IndexIntervals* iv) {
  if (static_cast<Eigen::Index>(names.size()) != gsi.first.size())
    throw std::invalid_argument("name count does not match the indices");
  csv::Writer w(path);
  std::vector<std::string> header{"parameter", "first", "total"};
  if (iv) header.insert(header.end(), {"first_min", "first_max", "total_min", "total_max"});
  w.header(header);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    std::vector<std::string> row{names[i], csv::format(gsi.first(k)), csv::format(gsi.total(k))};
    if (iv)
      for (double v : {iv->first_min(k), iv->first_max(k), iv->total_min(k), iv->total_max(k)})
        row.push_back(csv::format(v));
    w.row(row);
  }
}

void write_convergence_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                           const ConvergenceTable& table) {
  csv::Writer w(path);
  std::vector<std::string> header{"n"};
  for (const auto& n : names) header.push_back("first_" + n);
  for (const auto& n : names) header.push_back("total_" + n);
  header.insert(header.end(), {"change", "stabilized"});
  w.header(header);
  for (const auto& r : table.rows) {
    if (static_cast<Eigen::Index>(names.size()) != r.gsi.first.size())
      throw std::invalid_argument("name count does not match the indices");
    std::vector<std::string> row{std::to_string(r.n)};
    for (auto v : r.gsi.first) row.push_back(csv::format(v));
    for (auto v : r.gsi.total) row.push_back(csv::format(v));
    row.push_back(std::isfinite(r.change) ? csv::format(r.change) : "");
    row.push_back(r.stabilized ? "1" : "0");
    w.row(row);
  }
}

}  // namespace hydrocal::gsa
