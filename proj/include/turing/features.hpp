#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

#include "turing/grid_spectral.hpp"
#include "turing/simulator.hpp"

namespace turing {

/// Torus grid graph whose edge weights encode which side of the mean each node lies on.
struct PatternGraph {
  TorusGrid grid{1};
  double epsilon_weight = 0.003;
  double mean_concentration = 0.0;
  /// Weight of the edge (v, right(v)) and (v, down(v)), indexed by v.
  std::vector<double> right;
  std::vector<double> down;

  std::size_t edge_count() const { return right.size() + down.size(); }
  /// Dense weighted graph Laplacian D_G - Omega_G.
  Eigen::MatrixXd laplacian() const;
};

PatternGraph build_pattern_graph(const TorusGrid& grid, std::span<const double> field,
                                 double epsilon_weight = 0.003);
PatternGraph build_pattern_graph(const PatternField& pattern, std::size_t species_index = 0,
                                 double epsilon_weight = 0.003);

/// Holds K = (J + L)^{-1} for a connected graph with Laplacian L (J the all-ones matrix).
class ResistanceSolver {
 public:
  explicit ResistanceSolver(const Eigen::MatrixXd& laplacian);
  explicit ResistanceSolver(const PatternGraph& graph);

  std::size_t size() const noexcept { return static_cast<std::size_t>(k_.rows()); }
  double gram(std::size_t v, std::size_t w) const;
  double resistance(std::size_t v, std::size_t w) const;
  std::vector<double> gram_diag() const;
  /// Resistances from v to every node.
  std::vector<double> column(std::size_t v) const;

 private:
  double at(std::size_t v, std::size_t w) const {
    return v >= w ? k_(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(w))
                  : k_(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(v));
  }
  void check(std::size_t v) const;

  Eigen::MatrixXd k_;  // lower triangle holds K
};

struct RdhConfig {
  double radius = 8.0;
  std::size_t spacing = 1;
  std::size_t bins = 12;
  double r_max = 0.0;

  /// Throws DomainError on invalid values; r_max is checked only if `need_r_max`.
  void validate(bool need_r_max = true) const;
};

struct Rdh {
  std::vector<double> values;
  RdhConfig config;
};

/// Resistances R(v, v') for v on the sub-lattice with the given spacing and every v'
/// within toroidal distance `radius` (v' = v included), rounded to 24 significant bits.
std::vector<double> collect_resistances(const ResistanceSolver& solver, const TorusGrid& grid,
                                        double radius, std::size_t spacing = 1);

/// Normalized histogram of resistance values on [0, r_max); larger values are dropped.
Rdh histogram_rdh(std::span<const double> resistances, const RdhConfig& cfg);

Rdh compute_rdh(const ResistanceSolver& solver, const TorusGrid& grid, const RdhConfig& cfg);
Rdh compute_rdh(const PatternGraph& graph, const RdhConfig& cfg);

/// Linear-interpolation quantile (type 7). Reorders `values`.
double empirical_quantile(std::vector<double>& values, double p);

/// Maximum over patterns of the per-pattern 0.99 quantile.
double r_max_from_dataset(const std::vector<std::vector<double>>& per_pattern);

/// Center of the right-most local maximum of a 25-bin value histogram.
double maximal_concentration(std::span<const double> field, std::size_t bins = 25);
double maximal_concentration(const PatternField& pattern, std::size_t species_index = 0);

/// Connected components of the subgraph induced by nodes with value >= mean.
std::size_t connected_components_high(const TorusGrid& grid, std::span<const double> field);
std::size_t connected_components_high(const PatternField& pattern,
                                      std::size_t species_index = 0);

struct ExtraFeatures {
  double c_m = 0.0;
  std::size_t n_c = 0;
};

ExtraFeatures extra_features(const PatternField& pattern, std::size_t species_index = 0);

/// Throws DegenerateFeatureError if the field's coefficient of variation is below threshold.
void require_nonhomogeneous(std::span<const double> field, double threshold = 1e-3);

}  // namespace turing
