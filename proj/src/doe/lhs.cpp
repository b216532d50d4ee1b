/// @file lhs.cpp
/// @brief Latin hypercubes and their annealing.

#include "hydrocal/doe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace hydrocal::doe {
namespace {

double kernel_g(double x) {
  const double t = std::abs(x - 0.5);
  return 1.0 + 0.5 * t - 0.5 * t * t;
}

double kernel_f(double a, double b) {
  return 1.0 + 0.5 * std::abs(a - 0.5) + 0.5 * std::abs(b - 0.5) - 0.5 * std::abs(a - b);
}

/// Terms of the discrepancy that change under swaps: per-row products of g
/// and the symmetric matrix of pairwise products of f.
class DiscrepancyState {
 public:
  explicit DiscrepancyState(const Eigen::MatrixXd& x) : x_(x), n_(x.rows()), d_(x.cols()) {
    g_.resize(n_);
    c_.resize(n_, n_);
    for (Eigen::Index i = 0; i < n_; ++i) g_[i] = row_g(i);
    for (Eigen::Index i = 0; i < n_; ++i)
      for (Eigen::Index j = i; j < n_; ++j) c_(i, j) = c_(j, i) = pair(i, j);
    sum_g_ = g_.sum();
    sum_c_ = c_.sum();
  }

  double value() const {
    const double n = static_cast<double>(n_);
    return std::pow(13.0 / 12.0, static_cast<double>(d_)) - 2.0 / n * sum_g_ + sum_c_ / (n * n);
  }

  /// Change of the discrepancy if x(a,k) and x(b,k) were exchanged.
  double swap_delta(Eigen::Index a, Eigen::Index b, Eigen::Index k) {
    std::swap(x_(a, k), x_(b, k));
    const double ga = row_g(a), gb = row_g(b);
    double dc = 0.0;
    for (Eigen::Index j = 0; j < n_; ++j) {
      if (j == a || j == b) continue;
      ca_[j] = pair(a, j);
      cb_[j] = pair(b, j);
      dc += 2.0 * (ca_[j] - c_(a, j) + cb_[j] - c_(b, j));
    }
    caa_ = pair(a, a);
    cbb_ = pair(b, b);
    dc += caa_ - c_(a, a) + cbb_ - c_(b, b);
    std::swap(x_(a, k), x_(b, k));
    pending_ = {a, b, k, ga, gb, dc};
    const double n = static_cast<double>(n_);
    return -2.0 / n * (ga - g_[a] + gb - g_[b]) + dc / (n * n);
  }

  /// Applies the swap evaluated by the last swap_delta call.
  void commit() {
    const auto& p = pending_;
    std::swap(x_(p.a, p.k), x_(p.b, p.k));
    sum_g_ += p.ga - g_[p.a] + p.gb - g_[p.b];
    g_[p.a] = p.ga;
    g_[p.b] = p.gb;
    for (Eigen::Index j = 0; j < n_; ++j) {
      if (j == p.a || j == p.b) continue;
      c_(p.a, j) = c_(j, p.a) = ca_[j];
      c_(p.b, j) = c_(j, p.b) = cb_[j];
    }
    c_(p.a, p.a) = caa_;
    c_(p.b, p.b) = cbb_;
    sum_c_ += p.dc;
  }

  const Eigen::MatrixXd& points() const { return x_; }

  void reserve() {
    ca_.resize(n_);
    cb_.resize(n_);
  }

 private:
  double row_g(Eigen::Index i) const {
    double prod = 1.0;
    for (Eigen::Index k = 0; k < d_; ++k) prod *= kernel_g(x_(i, k));
    return prod;
  }
  double pair(Eigen::Index i, Eigen::Index j) const {
    double prod = 1.0;
    for (Eigen::Index k = 0; k < d_; ++k) prod *= kernel_f(x_(i, k), x_(j, k));
    return prod;
  }

  struct Pending {
    Eigen::Index a = 0, b = 0, k = 0;
    double ga = 0.0, gb = 0.0, dc = 0.0;
  };

  Eigen::MatrixXd x_;
  Eigen::Index n_, d_;
  Eigen::VectorXd g_;
  Eigen::MatrixXd c_;
  Eigen::VectorXd ca_, cb_;
  double caa_ = 0.0, cbb_ = 0.0;
  double sum_g_ = 0.0, sum_c_ = 0.0;
  Pending pending_;
};

}  // namespace

Design lhs(int n, int p, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("a Latin hypercube needs at least 2 points");
  if (p < 1) throw std::invalid_argument("a design needs at least one parameter");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Design d;
  d.seed = seed;
  d.scheme = Scheme::Lhs;
  d.unit.resize(n, p);
  std::vector<int> perm(static_cast<std::size_t>(n));
  const double below_one = std::nextafter(1.0, 0.0);
  for (int k = 0; k < p; ++k) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int i = 0; i < n; ++i) {
      const double u = std::min(unif(rng), below_one);
      d.unit(i, k) = std::min((perm[static_cast<std::size_t>(i)] + u) / n, below_one);
    }
  }
  return d;
}

bool is_latin(const Eigen::MatrixXd& unit) {
  const auto n = unit.rows();
  for (Eigen::Index k = 0; k < unit.cols(); ++k) {
    std::vector<bool> hit(static_cast<std::size_t>(n), false);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = unit(i, k);
      if (!(x >= 0.0 && x < 1.0)) return false;
      const auto s = static_cast<std::size_t>(std::floor(x * static_cast<double>(n)));
      if (s >= hit.size() || hit[s]) return false;
      hit[s] = true;
    }
  }
  return true;
}

double centered_l2_discrepancy(const Eigen::MatrixXd& unit) {
  if (unit.rows() < 1 || unit.cols() < 1) throw std::invalid_argument("empty design");
  for (Eigen::Index i = 0; i < unit.size(); ++i) {
    const double x = unit.data()[i];
    if (!(x >= 0.0 && x < 1.0)) throw std::domain_error("design values must lie in [0, 1)");
  }
  return DiscrepancyState(unit).value();
}

Design optimize_lhs(const Design& design, int iterations, std::uint64_t seed, AnnealingReport* report) {
  AnnealingOptions opt;
  opt.iterations = iterations;
  return optimize_lhs(design, opt, seed, report);
}

Design optimize_lhs(const Design& design, const AnnealingOptions& opt, std::uint64_t seed,
                    AnnealingReport* report) {
  if (design.scheme != Scheme::Lhs) throw std::invalid_argument("only plain LHS designs can be optimized");
  if (opt.iterations < 0) throw std::invalid_argument("iteration count must be non-negative");
  if (!is_latin(design.unit)) throw std::invalid_argument("design is not a Latin hypercube");

  const double parent = centered_l2_discrepancy(design.unit);
  Design out = design;
  out.scheme = Scheme::LhsOptimized;
  AnnealingReport rep{parent, parent, 0, 0};
  const auto n = design.rows(), p = design.cols();
  if (opt.iterations == 0 || n < 2) {
    if (report) *report = rep;
    return out;
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> row(0, n - 1), col(0, p - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto draw = [&] {
    const auto k = col(rng);
    const auto a = row(rng);
    auto b = row(rng);
    while (b == a) b = row(rng);
    return std::tuple{a, b, k};
  };

  DiscrepancyState state(design.unit);
  state.reserve();

  // Initial temperature: spread of the deltas of random swaps.
  double t0 = 0.0;
  {
    std::vector<double> deltas;
    for (int s = 0; s < opt.calibration_swaps; ++s) {
      const auto [a, b, k] = draw();
      deltas.push_back(state.swap_delta(a, b, k));
    }
    const double mean = std::accumulate(deltas.begin(), deltas.end(), 0.0) / deltas.size();
    for (double d : deltas) t0 += (d - mean) * (d - mean);
    t0 = std::sqrt(t0 / std::max<std::size_t>(1, deltas.size() - 1));
  }
  if (!(t0 > 0.0)) t0 = 1e-12;
  const double cooling = std::pow(opt.final_temperature_ratio, 1.0 / opt.iterations);

  double current = state.value();
  double best = current;
  Eigen::MatrixXd best_points = state.points();
  double temperature = t0;
  for (int it = 0; it < opt.iterations; ++it, temperature *= cooling) {
    const auto [a, b, k] = draw();
    const double delta = state.swap_delta(a, b, k);
    if (delta <= 0.0 || unif(rng) < std::exp(-delta / temperature)) {
      state.commit();
      current += delta;
      ++rep.accepted;
      if (current < best) {
        best = current;
        best_points = state.points();
        ++rep.improved;
      }
    }
  }

  // The running value drifts by rounding; decide on a fresh evaluation and
  // ignore gains at rounding level, e.g. row swaps of a one-column design.
  const double fresh = centered_l2_discrepancy(best_points);
  const double rounding = 1e-13 * std::pow(13.0 / 12.0, static_cast<double>(p));
  if (fresh < parent - rounding) {
    out.unit = best_points;
    rep.final = fresh;
  }
  if (!out.space.names.empty()) out.scaled = scale(out.unit, out.space);
  if (report) *report = rep;
  return out;
}

}  // namespace hydrocal::doe
