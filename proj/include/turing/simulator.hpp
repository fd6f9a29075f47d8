#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "turing/error.hpp"
#include "turing/grid_spectral.hpp"
#include "turing/stability.hpp"

namespace turing {

/// One concentration field per species, each of length grid.nodes().
using Fields = std::vector<std::vector<double>>;

struct SimConfig {
  double h = 0.2;
  double eps_inner = 1e-3;
  double eps_outer = 1e-6;
  double t_final = 2000.0;
  double check_interval = 100.0;
  double noise_amplitude = 0.01;
  std::uint64_t seed = 0;
  int max_inner_iters = 100;
  int max_halvings = 6;

  void validate() const;
  /// Defaults with the final time used for a given grid side (5000 from 128 up).
  static SimConfig for_grid(std::size_t side);

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

struct PatternField {
  TorusGrid grid{1};
  Fields species;
  GmParams params;
  double elapsed_time = 0.0;
  bool converged = false;

  std::span<const double> field(std::size_t species_index) const;
};

/// Raised when the time stepper diverges even at the smallest allowed step.
class SimulationFailure : public Error {
 public:
  SimulationFailure(const std::string& what, PatternField last_state)
      : Error(what), last_state_(std::move(last_state)) {}
  const PatternField& last_state() const noexcept { return last_state_; }

 private:
  PatternField last_state_;
};

/// u_i(v) = u_i* (1 + eta xi_v) with xi_v uniform on [-1, 1] from a seeded generator.
Fields perturbed_equilibrium(const TorusGrid& grid, std::span<const double> u_star,
                             double noise_amplitude, std::uint64_t seed);

PatternField initial_condition(const GmParams& p, const TorusGrid& grid,
                               double noise_amplitude, std::uint64_t seed);

/// Implicit Euler step for du/dt = f(u) - D L u, solved by the fixed-point iteration
///   v_l = (I + h D_i L)^{-1} (v_k + h f(v_{l-1})).
class ImplicitEulerStepper {
 public:
  ImplicitEulerStepper(ReactionModel model, TorusGrid grid, double h);

  double step_size() const noexcept { return h_; }
  const TorusGrid& grid() const noexcept { return grid_; }

  /// One fixed-point sweep. Returns false if any value of `next` is not finite.
  bool inner_step(const Fields& base, const Fields& iterate, Fields& next) const;

  enum class Outcome { converged, diverged, stalled };
  struct StepResult {
    Outcome outcome;
    int iterations;
  };
  /// Iterates inner_step from `base` until the relative change of the stacked state is
  /// at most eps_inner. On success `out` holds the new state.
  StepResult advance(const Fields& base, Fields& out, double eps_inner, int max_iters) const;

 private:
  ReactionModel model_;
  TorusGrid grid_;
  double h_;
  std::vector<SpectralOperator> operators_;
};

/// max-norm of f(v) - D L v over all species and nodes.
double steady_state_residual(const ReactionModel& model, const TorusGrid& grid,
                             const Fields& state);

struct SimulationResult {
  Fields state;
  double elapsed_time = 0.0;
  bool converged = false;
  double final_step = 0.0;
  int halvings = 0;
};

/// Integrates from `initial` until the steady-state residual drops below eps_outer
/// (checked every check_interval) or t_final is reached. Halves h on divergence.
SimulationResult simulate(const ReactionModel& model, const TorusGrid& grid, Fields initial,
                          const SimConfig& config);

PatternField simulate(const GmParams& p, const TorusGrid& grid, const SimConfig& config);

/// Standard deviation over mean of one field.
double coefficient_of_variation(std::span<const double> field);

}  // namespace turing
