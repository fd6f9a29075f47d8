#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace turing {

/// Constants of the dimensionless Gierer-Meinhardt model
///   f(u) = (a - b u1 + u1^2 / (u2 (1 + c u1^2)),  u1^2 - u2),   D = s diag(1, delta).
struct GmParams {
  double a = 0.0;
  double b = 1.0;
  double c = 0.0;
  double delta = 1.0;
  double s = 1.0;

  /// Throws DomainError unless b, delta, s > 0 and a, c >= 0.
  void validate() const;
  std::array<double, 5> as_array() const { return {a, b, c, delta, s}; }
  static GmParams from_array(std::span<const double> v);

  friend bool operator==(const GmParams&, const GmParams&) = default;
};

/// Pointwise reaction term and diagonal diffusion of an N-species system.
struct ReactionModel {
  using Reaction = std::function<void(std::span<const double> u, std::span<double> out)>;
  using Jacobian = std::function<Eigen::MatrixXd(std::span<const double> u)>;

  std::size_t species_count = 0;
  Reaction reaction;
  /// Optional closed form; central differences are used when empty.
  Jacobian jacobian;
  std::vector<double> diffusion;

  void validate() const;
};

ReactionModel gierer_meinhardt_model(const GmParams& p);

/// Throws DomainError for non-positive concentrations.
std::array<double, 2> gm_reaction(const GmParams& p, std::array<double, 2> u);

/// Homogeneous steady state (u1*, u1*^2); the smallest positive root of
/// a - b u + 1/(1 + c u^2) = 0.
std::array<double, 2> gm_equilibrium(const GmParams& p);

Eigen::MatrixXd jacobian(const ReactionModel& model, std::span<const double> u);

/// Largest real part of the eigenvalues of J(u*) - q2 D.
double dispersion(const ReactionModel& model, std::span<const double> u_star, double q2);

struct StabilityReport {
  std::vector<double> equilibrium;
  bool ode_stable = false;
  bool turing = false;
  double q2_star = 0.0;
  double max_growth = 0.0;
  double q2_max = 0.0;  ///< upper end of the scanned wavenumber range
};

struct DispersionScan {
  std::size_t points = 512;
  double q2_min = 1e-4;
  double residual_tolerance = 1e-8;
};

StabilityReport turing_check(const ReactionModel& model, std::span<const double> u_star,
                             const DispersionScan& scan = {});

/// Convenience: equilibrium + check for Gierer-Meinhardt parameters.
StabilityReport turing_check(const GmParams& p, const DispersionScan& scan = {});

/// (q2, dispersion) samples on the log-spaced scan grid used by turing_check.
std::vector<std::array<double, 2>> dispersion_curve(const ReactionModel& model,
                                                    std::span<const double> u_star,
                                                    const DispersionScan& scan = {});

}  // namespace turing
