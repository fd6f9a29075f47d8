#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace turing {

using NodeId = std::size_t;

/// Square grid with doubly periodic (torus) adjacency. Fields on the grid are
/// stored row-major, node id = row * side + col.
class TorusGrid {
 public:
  explicit TorusGrid(std::size_t side);

  std::size_t side() const noexcept { return side_; }
  std::size_t nodes() const noexcept { return side_ * side_; }

  NodeId node(std::size_t row, std::size_t col) const;
  std::size_t row(NodeId v) const noexcept { return v / side_; }
  std::size_t col(NodeId v) const noexcept { return v % side_; }

  NodeId right(NodeId v) const noexcept {
    return row(v) * side_ + (col(v) + 1) % side_;
  }
  NodeId left(NodeId v) const noexcept {
    return row(v) * side_ + (col(v) + side_ - 1) % side_;
  }
  NodeId down(NodeId v) const noexcept {
    return ((row(v) + 1) % side_) * side_ + col(v);
  }
  NodeId up(NodeId v) const noexcept {
    return ((row(v) + side_ - 1) % side_) * side_ + col(v);
  }
  std::array<NodeId, 4> neighbors(NodeId v) const noexcept {
    return {right(v), left(v), down(v), up(v)};
  }

  void check_node(NodeId v) const;
  void check_field(std::span<const double> field) const;

  friend bool operator==(const TorusGrid&, const TorusGrid&) = default;

 private:
  std::size_t side_;
};

/// out = L v for the positive-semidefinite 5-point Laplacian with periodic wrap.
void laplacian_matvec(const TorusGrid& grid, std::span<const double> v,
                      std::span<double> out);
std::vector<double> laplacian_matvec(const TorusGrid& grid, std::span<const double> v);

/// Euclidean distance between node positions, measured with wrap-around.
double toroidal_distance(const TorusGrid& grid, NodeId v, NodeId w);

namespace detail {
struct FftPlan;
}

/// Fourier-diagonalized (I + h_delta * L) on a torus grid.
///
/// The multiplier table is computed once per (side, h_delta) pair and shared
/// between all operators built for that pair. Instances are immutable and
/// solve() may be called concurrently.
class SpectralOperator {
 public:
  SpectralOperator(TorusGrid grid, double h_delta);

  const TorusGrid& grid() const noexcept { return grid_; }
  double h_delta() const noexcept { return h_delta_; }

  /// Multiplier at frequency (p, q): 1 + h_delta * (4 - 2cos(2 pi p/n) - 2cos(2 pi q/n)).
  double eigenvalue(std::size_t p, std::size_t q) const;

  /// x = (I + h_delta L)^{-1} b. x may alias b.
  void solve(std::span<const double> b, std::span<double> x) const;
  std::vector<double> solve(std::span<const double> b) const;

 private:
  TorusGrid grid_;
  double h_delta_;
  // Inverse multipliers on the r2c half spectrum, side x (side/2 + 1).
  std::shared_ptr<const std::vector<double>> inverse_multipliers_;
  std::shared_ptr<const detail::FftPlan> plan_;
};

}  // namespace turing
