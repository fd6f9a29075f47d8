#include "turing/grid_spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "turing/error.hpp"

namespace turing {

TorusGrid::TorusGrid(std::size_t side) : side_(side) {
  if (side == 0) throw DomainError("torus grid side must be positive");
}

NodeId TorusGrid::node(std::size_t row, std::size_t col) const {
  if (row >= side_ || col >= side_) {
    throw IndexError("grid position (" + std::to_string(row) + "," + std::to_string(col) +
                     ") outside " + std::to_string(side_) + "x" + std::to_string(side_) +
                     " grid");
  }
  return row * side_ + col;
}

void TorusGrid::check_node(NodeId v) const {
  if (v >= nodes()) {
    throw IndexError("node id " + std::to_string(v) + " outside grid with " +
                     std::to_string(nodes()) + " nodes");
  }
}

void TorusGrid::check_field(std::span<const double> field) const {
  if (field.size() != nodes()) {
    throw ShapeError("field has " + std::to_string(field.size()) + " values, grid has " +
                     std::to_string(nodes()) + " nodes");
  }
}

void laplacian_matvec(const TorusGrid& grid, std::span<const double> v,
                      std::span<double> out) {
  grid.check_field(v);
  grid.check_field(out);
  const std::size_t n = grid.side();
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t up = (r + n - 1) % n;
    const std::size_t down = (r + 1) % n;
    for (std::size_t c = 0; c < n; ++c) {
      const std::size_t left = (c + n - 1) % n;
      const std::size_t right = (c + 1) % n;
      out[r * n + c] = 4.0 * v[r * n + c] - v[up * n + c] - v[down * n + c] -
                       v[r * n + left] - v[r * n + right];
    }
  }
}

std::vector<double> laplacian_matvec(const TorusGrid& grid, std::span<const double> v) {
  std::vector<double> out(grid.nodes());
  laplacian_matvec(grid, v, out);
  return out;
}

double toroidal_distance(const TorusGrid& grid, NodeId v, NodeId w) {
  grid.check_node(v);
  grid.check_node(w);
  const auto wrap = [n = grid.side()](std::size_t a, std::size_t b) {
    const std::size_t d = a > b ? a - b : b - a;
    return static_cast<double>(std::min(d, n - d));
  };
  const double dr = wrap(grid.row(v), grid.row(w));
  const double dc = wrap(grid.col(v), grid.col(w));
  return std::sqrt(dr * dr + dc * dc);
}

namespace detail {

namespace {
// The FFTW planner is not thread-safe; plan creation and destruction go through this lock.
// Namespace scope so it outlives the function-local plan registry.
std::mutex g_planner_mutex;

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double, FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex, FftwFree>;

std::size_t half_size(std::size_t side) { return side * (side / 2 + 1); }
}  // namespace

struct FftPlan {
  std::size_t side;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  explicit FftPlan(std::size_t n) : side(n) {
    RealBuffer real(fftw_alloc_real(n * n));
    ComplexBuffer spec(fftw_alloc_complex(half_size(n)));
    const int ni = static_cast<int>(n);
    std::lock_guard lock(g_planner_mutex);
    forward = fftw_plan_dft_r2c_2d(ni, ni, real.get(), spec.get(), FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_2d(ni, ni, spec.get(), real.get(), FFTW_ESTIMATE);
    if (!forward || !backward) throw NumericalError("FFTW plan creation failed");
  }
  ~FftPlan() {
    std::lock_guard lock(g_planner_mutex);
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;
};

namespace {

std::shared_ptr<const FftPlan> plan_for(std::size_t side) {
  static std::mutex m;
  static std::map<std::size_t, std::shared_ptr<const FftPlan>> plans;
  std::lock_guard lock(m);
  auto& slot = plans[side];
  if (!slot) slot = std::make_shared<const FftPlan>(side);
  return slot;
}

std::shared_ptr<const std::vector<double>> inverse_multipliers_for(std::size_t side,
                                                                   double h_delta) {
  static std::mutex m;
  static std::map<std::pair<std::size_t, double>, std::weak_ptr<const std::vector<double>>>
      cache;
  std::lock_guard lock(m);
  const auto key = std::make_pair(side, h_delta);
  if (auto it = cache.find(key); it != cache.end()) {
    if (auto sp = it->second.lock()) return sp;
  }
  std::erase_if(cache, [](const auto& kv) { return kv.second.expired(); });

  const std::size_t half = side / 2 + 1;
  std::vector<double> cosines(side);
  for (std::size_t k = 0; k < side; ++k) {
    cosines[k] = 2.0 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) /
                                static_cast<double>(side));
  }
  auto table = std::make_shared<std::vector<double>>(side * half);
  for (std::size_t p = 0; p < side; ++p) {
    for (std::size_t q = 0; q < half; ++q) {
      const double lambda = 1.0 + h_delta * (4.0 - cosines[p] - cosines[q]);
      (*table)[p * half + q] = 1.0 / lambda;
    }
  }
  std::shared_ptr<const std::vector<double>> result = std::move(table);
  cache[key] = result;
  return result;
}

struct Workspace {
  std::size_t side = 0;
  RealBuffer real;
  ComplexBuffer spec;

  void ensure(std::size_t n) {
    if (side == n) return;
    real.reset(fftw_alloc_real(n * n));
    spec.reset(fftw_alloc_complex(half_size(n)));
    side = n;
  }
};

}  // namespace
}  // namespace detail

SpectralOperator::SpectralOperator(TorusGrid grid, double h_delta)
    : grid_(grid), h_delta_(h_delta) {
  if (!(h_delta >= 0.0) || !std::isfinite(h_delta)) {
    throw DomainError("spectral operator needs a finite h*delta >= 0");
  }
  inverse_multipliers_ = detail::inverse_multipliers_for(grid_.side(), h_delta_);
  plan_ = detail::plan_for(grid_.side());
}

double SpectralOperator::eigenvalue(std::size_t p, std::size_t q) const {
  const double n = static_cast<double>(grid_.side());
  const double tp = 2.0 * std::numbers::pi * static_cast<double>(p) / n;
  const double tq = 2.0 * std::numbers::pi * static_cast<double>(q) / n;
  return 1.0 + h_delta_ * (4.0 - 2.0 * std::cos(tp) - 2.0 * std::cos(tq));
}

void SpectralOperator::solve(std::span<const double> b, std::span<double> x) const {
  grid_.check_field(b);
  grid_.check_field(x);
  thread_local detail::Workspace ws;
  const std::size_t n = grid_.side();
  const std::size_t m = grid_.nodes();
  ws.ensure(n);

  double* real = ws.real.get();
  std::copy(b.begin(), b.end(), real);
  fftw_execute_dft_r2c(plan_->forward, real, ws.spec.get());

  const auto& inv = *inverse_multipliers_;
  const std::size_t half = detail::half_size(n);
  fftw_complex* spec = ws.spec.get();
  for (std::size_t k = 0; k < half; ++k) {
    spec[k][0] *= inv[k];
    spec[k][1] *= inv[k];
  }
  fftw_execute_dft_c2r(plan_->backward, spec, real);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < m; ++k) x[k] = real[k] * scale;
}

std::vector<double> SpectralOperator::solve(std::span<const double> b) const {
  std::vector<double> x(b.size());
  solve(b, x);
  return x;
}

}  // namespace turing
