#include "turing/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "turing/error.hpp"

namespace turing {

namespace {

// Rounds to 24 significant bits so values equal up to round-off bin identically.
double snap(double x) {
  int e = 0;
  const double f = std::frexp(x, &e);
  return std::ldexp(std::nearbyint(std::ldexp(f, 24)), e - 24);
}

double mean_of(std::span<const double> field) {
  return std::accumulate(field.begin(), field.end(), 0.0) / static_cast<double>(field.size());
}

std::span<const double> species_field(const PatternField& pattern, std::size_t species_index) {
  const auto field = pattern.field(species_index);
  pattern.grid.check_field(field);
  return field;
}

}  // namespace

Eigen::MatrixXd PatternGraph::laplacian() const {
  const auto m = static_cast<Eigen::Index>(grid.nodes());
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(m, m);
  const auto add_edge = [&](NodeId v, NodeId w, double weight) {
    if (v == w) return;
    const auto a = static_cast<Eigen::Index>(v);
    const auto b = static_cast<Eigen::Index>(w);
    l(a, a) += weight;
    l(b, b) += weight;
    l(a, b) -= weight;
    l(b, a) -= weight;
  };
  for (NodeId v = 0; v < grid.nodes(); ++v) {
    add_edge(v, grid.right(v), right[v]);
    add_edge(v, grid.down(v), down[v]);
  }
  return l;
}

PatternGraph build_pattern_graph(const TorusGrid& grid, std::span<const double> field,
                                 double epsilon_weight) {
  grid.check_field(field);
  if (!(epsilon_weight > 0.0)) throw DomainError("edge weight epsilon must be positive");
  for (double x : field) {
    if (!std::isfinite(x)) throw DomainError("pattern contains non-finite values");
  }
  PatternGraph g;
  g.grid = grid;
  g.epsilon_weight = epsilon_weight;
  g.mean_concentration = mean_of(field);
  const double mean = g.mean_concentration;
  const auto weight = [&](NodeId v, NodeId w) {
    return (field[v] >= mean) == (field[w] >= mean) ? 1.0 : epsilon_weight;
  };
  g.right.resize(grid.nodes());
  g.down.resize(grid.nodes());
  for (NodeId v = 0; v < grid.nodes(); ++v) {
    g.right[v] = weight(v, grid.right(v));
    g.down[v] = weight(v, grid.down(v));
  }
  return g;
}

PatternGraph build_pattern_graph(const PatternField& pattern, std::size_t species_index,
                                 double epsilon_weight) {
  return build_pattern_graph(pattern.grid, species_field(pattern, species_index),
                             epsilon_weight);
}

ResistanceSolver::ResistanceSolver(const Eigen::MatrixXd& laplacian) {
  if (laplacian.rows() != laplacian.cols() || laplacian.rows() == 0) {
    throw ShapeError("Laplacian must be a nonempty square matrix");
  }
  const Eigen::Index m = laplacian.rows();

  // a <- chol(J + L), lower factor in place.
  Eigen::MatrixXd a = laplacian.array() + 1.0;
  Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("J + L is not positive definite; is the graph connected?");
  }
  // A disconnected graph leaves a pivot at round-off level instead of a negative one.
  const Eigen::VectorXd pivots = a.diagonal();
  if (pivots.minCoeff() < 1e-6 * pivots.maxCoeff()) {
    throw NumericalError("J + L is numerically singular; is the graph connected?");
  }

  // K = (J + L)^{-1} = X^T X with X = C^{-1} lower triangular, built block column by
  // block column so the zero upper part is never touched.
  constexpr Eigen::Index kBlock = 256;
  k_ = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index j = 0; j < m; j += kBlock) {
    const Eigen::Index w = std::min(kBlock, m - j);
    auto x = k_.block(j, j, m - j, w);
    x.topRows(w).setIdentity();
    a.block(j, j, m - j, m - j).triangularView<Eigen::Lower>().solveInPlace(x);
  }
  // Row panel k0..k0+w of X only reaches columns below k0 + w.
  a.setZero();
  for (Eigen::Index k0 = 0; k0 < m; k0 += kBlock) {
    const Eigen::Index w = std::min(kBlock, m - k0);
    const Eigen::Index reach = k0 + w;
    a.topLeftCorner(reach, reach).selfadjointView<Eigen::Lower>().rankUpdate(
        k_.block(k0, 0, w, reach).transpose());
  }
  k_.swap(a);
}

ResistanceSolver::ResistanceSolver(const PatternGraph& graph)
    : ResistanceSolver(graph.laplacian()) {}

void ResistanceSolver::check(std::size_t v) const {
  if (v >= size()) {
    throw IndexError("node id " + std::to_string(v) + " outside graph with " +
                     std::to_string(size()) + " nodes");
  }
}

double ResistanceSolver::gram(std::size_t v, std::size_t w) const {
  check(v);
  check(w);
  return at(v, w);
}

double ResistanceSolver::resistance(std::size_t v, std::size_t w) const {
  check(v);
  check(w);
  if (v == w) return 0.0;
  return std::max(0.0, at(v, v) + at(w, w) - 2.0 * at(v, w));
}

std::vector<double> ResistanceSolver::gram_diag() const {
  std::vector<double> d(size());
  for (std::size_t v = 0; v < size(); ++v) d[v] = at(v, v);
  return d;
}

std::vector<double> ResistanceSolver::column(std::size_t v) const {
  check(v);
  std::vector<double> r(size());
  for (std::size_t w = 0; w < size(); ++w) r[w] = resistance(v, w);
  return r;
}

void RdhConfig::validate(bool need_r_max) const {
  if (!(radius >= 1.0) || !std::isfinite(radius)) throw DomainError("radius must be at least 1");
  if (spacing < 1) throw DomainError("spacing must be positive");
  if (bins < 2) throw DomainError("histogram needs at least two bins");
  if (need_r_max && !(r_max > 0.0 && std::isfinite(r_max))) {
    throw DomainError("r_max must be positive");
  }
}

std::vector<double> collect_resistances(const ResistanceSolver& solver, const TorusGrid& grid,
                                        double radius, std::size_t spacing) {
  if (solver.size() != grid.nodes()) throw ShapeError("solver and grid sizes differ");
  if (spacing < 1) throw DomainError("spacing must be positive");
  const std::size_t n = grid.side();

  // Distinct offsets (dr, dc) modulo n whose wrapped length is within the radius.
  std::vector<std::pair<std::size_t, std::size_t>> offsets;
  for (std::size_t dr = 0; dr < n; ++dr) {
    const double wr = static_cast<double>(std::min(dr, n - dr));
    for (std::size_t dc = 0; dc < n; ++dc) {
      const double wc = static_cast<double>(std::min(dc, n - dc));
      if (std::sqrt(wr * wr + wc * wc) <= radius) offsets.emplace_back(dr, dc);
    }
  }

  std::vector<double> values;
  const std::size_t per_axis = (n + spacing - 1) / spacing;
  values.reserve(per_axis * per_axis * offsets.size());
  for (std::size_t r = 0; r < n; r += spacing) {
    for (std::size_t c = 0; c < n; c += spacing) {
      const NodeId v = r * n + c;
      for (const auto& [dr, dc] : offsets) {
        const NodeId w = ((r + dr) % n) * n + (c + dc) % n;
        values.push_back(snap(solver.resistance(v, w)));
      }
    }
  }
  return values;
}

Rdh histogram_rdh(std::span<const double> resistances, const RdhConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> counts(cfg.bins, 0);
  std::size_t kept = 0;
  const double scale = static_cast<double>(cfg.bins) / cfg.r_max;
  for (double r : resistances) {
    if (!(r < cfg.r_max)) continue;
    const auto bin = std::min(cfg.bins - 1, static_cast<std::size_t>(std::max(0.0, r) * scale));
    ++counts[bin];
    ++kept;
  }
  if (kept == 0) throw DegenerateFeatureError("no resistance value below r_max");
  Rdh h;
  h.config = cfg;
  h.values.resize(cfg.bins);
  for (std::size_t b = 0; b < cfg.bins; ++b) {
    h.values[b] = static_cast<double>(counts[b]) / static_cast<double>(kept);
  }
  return h;
}

Rdh compute_rdh(const ResistanceSolver& solver, const TorusGrid& grid, const RdhConfig& cfg) {
  cfg.validate();
  return histogram_rdh(collect_resistances(solver, grid, cfg.radius, cfg.spacing), cfg);
}

Rdh compute_rdh(const PatternGraph& graph, const RdhConfig& cfg) {
  cfg.validate();
  return compute_rdh(ResistanceSolver(graph), graph.grid, cfg);
}

double empirical_quantile(std::vector<double>& values, double p) {
  if (values.empty()) throw ShapeError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
  const double h = static_cast<double>(values.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo),
                   values.end());
  const double x_lo = values[lo];
  if (lo + 1 >= values.size()) return x_lo;
  const double x_hi =
      *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return x_lo + (h - static_cast<double>(lo)) * (x_hi - x_lo);
}

double r_max_from_dataset(const std::vector<std::vector<double>>& per_pattern) {
  if (per_pattern.empty()) throw ShapeError("r_max needs at least one pattern");
  double best = 0.0;
  for (const auto& values : per_pattern) {
    std::vector<double> copy = values;
    best = std::max(best, empirical_quantile(copy, 0.99));
  }
  return best;
}

double maximal_concentration(std::span<const double> field, std::size_t bins) {
  if (field.empty()) throw ShapeError("empty field");
  if (bins < 1) throw DomainError("histogram needs at least one bin");
  const auto [lo_it, hi_it] = std::minmax_element(field.begin(), field.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) return lo;

  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<std::size_t> counts(bins, 0);
  for (double x : field) {
    const auto b = static_cast<std::size_t>((x - lo) / width);
    ++counts[std::min(b, bins - 1)];
  }
  for (std::size_t k = bins; k-- > 0;) {
    if (counts[k] == 0) continue;
    const bool left_ok = k == 0 || counts[k] >= counts[k - 1];
    const bool right_ok = k + 1 == bins || counts[k] >= counts[k + 1];
    if (left_ok && right_ok) return lo + (static_cast<double>(k) + 0.5) * width;
  }
  return hi;
}

double maximal_concentration(const PatternField& pattern, std::size_t species_index) {
  return maximal_concentration(species_field(pattern, species_index));
}

std::size_t connected_components_high(const TorusGrid& grid, std::span<const double> field) {
  grid.check_field(field);
  const double mean = mean_of(field);
  const std::size_t m = grid.nodes();
  std::vector<char> seen(m, 0);
  std::vector<NodeId> stack;
  std::size_t components = 0;
  for (NodeId start = 0; start < m; ++start) {
    if (seen[start] || field[start] < mean) continue;
    ++components;
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const NodeId v = stack.back();
      stack.pop_back();
      for (NodeId w : grid.neighbors(v)) {
        if (!seen[w] && field[w] >= mean) {
          seen[w] = 1;
          stack.push_back(w);
        }
      }
    }
  }
  return components;
}

std::size_t connected_components_high(const PatternField& pattern, std::size_t species_index) {
  return connected_components_high(pattern.grid, species_field(pattern, species_index));
}

ExtraFeatures extra_features(const PatternField& pattern, std::size_t species_index) {
  return {maximal_concentration(pattern, species_index),
          connected_components_high(pattern, species_index)};
}

void require_nonhomogeneous(std::span<const double> field, double threshold) {
  const double cv = coefficient_of_variation(field);
  if (!(cv >= threshold)) {
    throw DegenerateFeatureError("pattern is homogeneous (coefficient of variation " +
                                 std::to_string(cv) + ")");
  }
}

}  // namespace turing
