#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

#include "turing/global_gmres.hpp"
#include "turing/kernels.hpp"

namespace turing {

struct SvrOptions {
  double tolerance = 1e-6;  ///< KKT residual target
  long max_sweeps = 100000;
  double jitter = 1e-10;    ///< added to the Gram diagonal
};

/// Solution of  min_alpha  sum_i max(0, |y_i - (K alpha)_i| - eps) + (lambda/2) alpha^T K alpha.
struct SvrSolution {
  Eigen::VectorXd alpha;
  Eigen::VectorXd theta;  ///< dual variables in [-1, 1], alpha = theta / lambda
  double objective = 0.0;
  double kkt_residual = 0.0;
  long sweeps = 0;
};

double svr_objective(const Eigen::MatrixXd& k, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& alpha, double lambda, double epsilon_tube);

/// Largest violation of the optimality conditions for dual variables theta.
double svr_kkt_residual(const Eigen::MatrixXd& k, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& theta, double lambda, double epsilon_tube);

/// Dual coordinate descent with active-set polishing. Throws TrainingError if the
/// KKT residual stays above tolerance after the sweep budget.
SvrSolution svr_solve(const Eigen::MatrixXd& k, const Eigen::VectorXd& y, double lambda,
                      double epsilon_tube, const SvrOptions& options = {},
                      const std::optional<Eigen::VectorXd>& warm_theta = std::nullopt);

struct SvrModel {
  std::vector<double> alphas;
  PointSet training_inputs;
  KernelSpec kernel;
  double lambda = 1.0;
  double epsilon_tube = 0.0;
  double kkt_residual = 0.0;
  double objective = 0.0;

  double predict(std::span<const double> x) const;
};

SvrModel svr_train(const PointSet& inputs, std::span<const double> targets,
                   const KernelSpec& kernel, double lambda, double epsilon_tube,
                   const SvrOptions& options = {});

struct PreimageResult {
  std::vector<double> y;
  double objective = 0.0;  ///< 1 - 2 sum_i v_i l(y, y_i)
  bool line_search_failed = false;
};

struct PreimageOptions {
  std::size_t starts = 5;
  int max_steps = 500;
  double gradient_tolerance = 1e-8;
};

/// Minimizes 1 - 2 sum_i v_i exp(-||y - y_i||^2 / gamma) over the box [0,1]^d.
PreimageResult solve_preimage(const Eigen::VectorXd& v, const PointSet& targets, double gamma,
                              const PreimageOptions& options = {});

struct OvkModel {
  PointSet training_inputs;
  PointSet training_targets;
  KernelSpec input_kernel;
  KernelSpec output_kernel{KernelKind::gaussian_output, 1.0};
  double lambda = 1.0;
  double eps_reg = 1e-4;
  Eigen::MatrixXd k_n;
  Eigen::MatrixXd l_n;
  Eigen::MatrixXd t_n;
  Eigen::MatrixXd u;
  double gmres_residual = 0.0;

  /// T_n U k_x.
  Eigen::VectorXd embed(std::span<const double> x) const;
  PreimageResult predict_detail(std::span<const double> x) const;
  std::vector<double> predict(std::span<const double> x) const;
};

/// T_n = L_n - (K_n + n eps I)^{-1} K_n L_n.
Eigen::MatrixXd conditional_covariance(const Eigen::MatrixXd& k_n, const Eigen::MatrixXd& l_n,
                                       double eps_reg);

/// Solves T U K + n lambda U = I by global GMRES.
GmresResult solve_ovk_system(const Eigen::MatrixXd& k_n, const Eigen::MatrixXd& t_n,
                             double lambda, const GmresOptions& options = {});

OvkModel ovk_train(const PointSet& inputs, const PointSet& targets,
                   const KernelSpec& input_kernel, const KernelSpec& output_kernel,
                   double lambda, double eps_reg = 1e-4, const GmresOptions& options = {});

}  // namespace turing
