#include "turing/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <string>

namespace turing {

void SimConfig::validate() const {
  const auto positive = [](double x) { return x > 0.0 && std::isfinite(x); };
  if (!positive(h) || !positive(eps_inner) || !positive(eps_outer) || !positive(t_final) ||
      !positive(check_interval)) {
    throw DomainError("h, eps_inner, eps_outer, t_final and check_interval must be positive");
  }
  if (check_interval > t_final) throw DomainError("check_interval must not exceed t_final");
  if (!(noise_amplitude >= 0.0)) throw DomainError("noise_amplitude must be non-negative");
  if (max_inner_iters < 1) throw DomainError("max_inner_iters must be positive");
  if (max_halvings < 0) throw DomainError("max_halvings must be non-negative");
}

SimConfig SimConfig::for_grid(std::size_t side) {
  SimConfig cfg;
  cfg.t_final = side >= 128 ? 5000.0 : 2000.0;
  return cfg;
}

std::span<const double> PatternField::field(std::size_t species_index) const {
  if (species_index >= species.size()) {
    throw IndexError("species index " + std::to_string(species_index) + " out of range");
  }
  return species[species_index];
}

Fields perturbed_equilibrium(const TorusGrid& grid, std::span<const double> u_star,
                             double noise_amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  Fields fields(u_star.size(), std::vector<double>(grid.nodes()));
  for (std::size_t i = 0; i < u_star.size(); ++i) {
    for (auto& x : fields[i]) {
      const double unit = static_cast<double>(rng() >> 11) * kScale;
      const double xi = 2.0 * unit - 1.0;
      x = u_star[i] * (1.0 + noise_amplitude * xi);
    }
  }
  return fields;
}

PatternField initial_condition(const GmParams& p, const TorusGrid& grid,
                               double noise_amplitude, std::uint64_t seed) {
  const auto u = gm_equilibrium(p);
  PatternField pattern;
  pattern.grid = grid;
  pattern.params = p;
  pattern.species = perturbed_equilibrium(grid, u, noise_amplitude, seed);
  return pattern;
}

ImplicitEulerStepper::ImplicitEulerStepper(ReactionModel model, TorusGrid grid, double h)
    : model_(std::move(model)), grid_(grid), h_(h) {
  model_.validate();
  if (!(h > 0.0)) throw DomainError("time step must be positive");
  operators_.reserve(model_.species_count);
  for (double d : model_.diffusion) operators_.emplace_back(grid_, h_ * d);
}

bool ImplicitEulerStepper::inner_step(const Fields& base, const Fields& iterate,
                                      Fields& next) const {
  const std::size_t n_species = model_.species_count;
  const std::size_t m = grid_.nodes();
  if (base.size() != n_species || iterate.size() != n_species) {
    throw ShapeError("state has wrong number of species");
  }
  next.resize(n_species);
  for (auto& f : next) f.resize(m);

  // next temporarily holds the right-hand side base + h f(iterate).
  std::vector<double> u(n_species), f(n_species);
  for (std::size_t v = 0; v < m; ++v) {
    for (std::size_t i = 0; i < n_species; ++i) u[i] = iterate[i][v];
    model_.reaction(u, f);
    for (std::size_t i = 0; i < n_species; ++i) next[i][v] = base[i][v] + h_ * f[i];
  }
  bool finite = true;
  for (std::size_t i = 0; i < n_species; ++i) {
    operators_[i].solve(next[i], next[i]);
    for (double x : next[i]) finite = finite && std::isfinite(x);
  }
  return finite;
}

ImplicitEulerStepper::StepResult ImplicitEulerStepper::advance(const Fields& base,
                                                               Fields& out, double eps_inner,
                                                               int max_iters) const {
  Fields prev = base;
  for (int l = 1; l <= max_iters; ++l) {
    if (!inner_step(base, prev, out)) return {Outcome::diverged, l};
    double diff = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      for (std::size_t v = 0; v < out[i].size(); ++v) {
        const double d = out[i][v] - prev[i][v];
        diff += d * d;
        norm += prev[i][v] * prev[i][v];
      }
    }
    if (std::sqrt(diff) <= eps_inner * std::sqrt(norm)) return {Outcome::converged, l};
    std::swap(prev, out);
  }
  return {Outcome::stalled, max_iters};
}

double steady_state_residual(const ReactionModel& model, const TorusGrid& grid,
                             const Fields& state) {
  const std::size_t n_species = model.species_count;
  if (state.size() != n_species) throw ShapeError("state has wrong number of species");
  std::vector<std::vector<double>> lap(n_species);
  for (std::size_t i = 0; i < n_species; ++i) lap[i] = laplacian_matvec(grid, state[i]);
  std::vector<double> u(n_species), f(n_species);
  double worst = 0.0;
  for (std::size_t v = 0; v < grid.nodes(); ++v) {
    for (std::size_t i = 0; i < n_species; ++i) u[i] = state[i][v];
    model.reaction(u, f);
    for (std::size_t i = 0; i < n_species; ++i) {
      const double r = f[i] - model.diffusion[i] * lap[i][v];
      if (!std::isfinite(r)) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, std::abs(r));
    }
  }
  return worst;
}

SimulationResult simulate(const ReactionModel& model, const TorusGrid& grid, Fields initial,
                          const SimConfig& config) {
  config.validate();
  model.validate();
  if (initial.size() != model.species_count) throw ShapeError("initial state has wrong species count");
  for (const auto& f : initial) grid.check_field(f);

  SimulationResult result;
  result.state = std::move(initial);
  double h = config.h;
  auto stepper = std::make_unique<ImplicitEulerStepper>(model, grid, h);

  // t = t_base + steps * h avoids drift from summing h thousands of times.
  double t_base = 0.0;
  long steps = 0;
  double t = 0.0;
  double next_check = config.check_interval;
  const double slack = 1e-9 * config.h;
  Fields next;

  while (t < config.t_final - slack) {
    const double remaining = config.t_final - t;
    std::unique_ptr<ImplicitEulerStepper> last_step;
    const ImplicitEulerStepper* active = stepper.get();
    if (remaining < h - slack) {
      last_step = std::make_unique<ImplicitEulerStepper>(model, grid, remaining);
      active = last_step.get();
    }
    const auto step = active->advance(result.state, next, config.eps_inner,
                                      config.max_inner_iters);
    if (step.outcome != ImplicitEulerStepper::Outcome::converged) {
      if (result.halvings >= config.max_halvings) {
        result.elapsed_time = t;
        result.final_step = h;
        PatternField last;
        last.grid = grid;
        last.species = result.state;
        last.elapsed_time = t;
        throw SimulationFailure("time stepping diverged at t=" + std::to_string(t) +
                                    " with h=" + std::to_string(h),
                                std::move(last));
      }
      ++result.halvings;
      t_base = t;
      steps = 0;
      h *= 0.5;
      stepper = std::make_unique<ImplicitEulerStepper>(model, grid, h);
      continue;
    }
    std::swap(result.state, next);
    if (last_step) {
      t = config.t_final;
    } else {
      ++steps;
      t = t_base + static_cast<double>(steps) * h;
    }

    if (t >= next_check - slack) {
      next_check += config.check_interval;
      if (steady_state_residual(model, grid, result.state) <= config.eps_outer) {
        result.converged = true;
        break;
      }
    }
  }
  result.elapsed_time = t;
  result.final_step = h;
  return result;
}

PatternField simulate(const GmParams& p, const TorusGrid& grid, const SimConfig& config) {
  PatternField pattern = initial_condition(p, grid, config.noise_amplitude, config.seed);
  try {
    auto result = simulate(gierer_meinhardt_model(p), grid, std::move(pattern.species), config);
    pattern.species = std::move(result.state);
    pattern.elapsed_time = result.elapsed_time;
    pattern.converged = result.converged;
  } catch (const SimulationFailure& failure) {
    PatternField last = failure.last_state();
    last.params = p;
    throw SimulationFailure(failure.what(), std::move(last));
  }
  return pattern;
}

double coefficient_of_variation(std::span<const double> field) {
  if (field.empty()) throw ShapeError("empty field");
  double mean = 0.0;
  for (double x : field) mean += x;
  mean /= static_cast<double>(field.size());
  double var = 0.0;
  for (double x : field) var += (x - mean) * (x - mean);
  var /= static_cast<double>(field.size());
  return std::sqrt(var) / std::abs(mean);
}

}  // namespace turing
