#include "turing/kernel_regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "turing/error.hpp"

namespace turing {

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

// Violation of the optimality condition of one dual coordinate, given r = y - K theta / lambda.
double coordinate_violation(double theta, double r, double eps) {
  if (theta >= 1.0) return std::max(0.0, eps - r);
  if (theta <= -1.0) return std::max(0.0, r + eps);
  if (theta > 0.0) return std::abs(r - eps);
  if (theta < 0.0) return std::abs(r + eps);
  return std::max(0.0, std::abs(r) - eps);
}

double residual_from(const Eigen::VectorXd& y, const Eigen::VectorXd& k_theta,
                     const Eigen::VectorXd& theta, double lambda, double eps) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double r = y(i) - k_theta(i) / lambda;
    worst = std::max(worst, coordinate_violation(theta(i), r, eps));
  }
  return worst;
}

// Active-set refinement: solves for the free coordinates with their signs held fixed and
// moves toward that solution as far as the box and the signs allow. Coordinates that block
// the step are pinned to 0 or +-1 and the solve is repeated. Returns false if nothing moved.
bool polish(const Eigen::MatrixXd& k, const Eigen::VectorXd& y, double lambda, double eps,
            Eigen::VectorXd& theta) {
  bool moved = false;
  for (Eigen::Index round = 0; round <= theta.size(); ++round) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      if (theta(i) != 0.0 && std::abs(theta(i)) < 1.0) free.push_back(i);
    }
    if (free.empty()) return moved;
    const auto f = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd kff(f, f);
    Eigen::VectorXd rhs(f);
    for (Eigen::Index a = 0; a < f; ++a) {
      const Eigen::Index i = free[static_cast<std::size_t>(a)];
      const double sign = theta(i) > 0.0 ? 1.0 : -1.0;
      double fixed = 0.0;
      for (Eigen::Index j = 0; j < theta.size(); ++j) {
        if (theta(j) == 0.0 || std::abs(theta(j)) >= 1.0) fixed += k(i, j) * theta(j);
      }
      rhs(a) = lambda * (y(i) - eps * sign) - fixed;
      for (Eigen::Index b = 0; b < f; ++b) kff(a, b) = k(i, free[static_cast<std::size_t>(b)]);
    }
    const Eigen::VectorXd sol = kff.ldlt().solve(rhs);
    if (!sol.allFinite()) return moved;

    double step = 1.0;
    Eigen::Index blocking = -1;
    double blocking_value = 0.0;
    for (Eigen::Index a = 0; a < f; ++a) {
      const double old = theta(free[static_cast<std::size_t>(a)]);
      const double d = sol(a) - old;
      // Each coordinate may travel to zero on its sign side or to the box edge.
      double limit = std::numeric_limits<double>::infinity();
      double target = 0.0;
      if (d != 0.0) {
        target = (old > 0.0) == (d > 0.0) ? (old > 0.0 ? 1.0 : -1.0) : 0.0;
        limit = (target - old) / d;
      }
      if (limit < step) {
        step = limit;
        blocking = a;
        blocking_value = target;
      }
    }
    for (Eigen::Index a = 0; a < f; ++a) {
      const Eigen::Index i = free[static_cast<std::size_t>(a)];
      const double old = theta(i);
      double next = old + step * (sol(a) - old);
      if (a == blocking) next = blocking_value;
      // Round-off must not flip a sign or leave the box.
      if (old > 0.0) next = std::clamp(next, 0.0, 1.0);
      if (old < 0.0) next = std::clamp(next, -1.0, 0.0);
      theta(i) = next;
    }
    moved = moved || step > 0.0;
    if (blocking < 0) return true;
  }
  return moved;
}

// y^T theta - eps |theta|_1 - theta^T K theta / (2 lambda), given K theta.
double dual_value(const Eigen::VectorXd& y, const Eigen::VectorXd& k_theta,
                  const Eigen::VectorXd& theta, double lambda, double eps) {
  return y.dot(theta) - eps * theta.lpNorm<1>() - theta.dot(k_theta) / (2.0 * lambda);
}

void check_svr_args(const Eigen::MatrixXd& k, const Eigen::VectorXd& y, double lambda,
                    double epsilon_tube) {
  if (k.rows() != k.cols() || k.rows() != y.size()) throw ShapeError("Gram matrix and targets differ in size");
  if (y.size() == 0) throw ShapeError("SVR needs at least one sample");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be positive");
  if (!(epsilon_tube >= 0.0)) throw DomainError("epsilon tube must be non-negative");
}

}  // namespace

double svr_objective(const Eigen::MatrixXd& k, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& alpha, double lambda, double epsilon_tube) {
  const Eigen::VectorXd f = k * alpha;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    loss += std::max(0.0, std::abs(y(i) - f(i)) - epsilon_tube);
  }
  return loss + 0.5 * lambda * alpha.dot(f);
}

double svr_kkt_residual(const Eigen::MatrixXd& k, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& theta, double lambda, double epsilon_tube) {
  check_svr_args(k, y, lambda, epsilon_tube);
  return residual_from(y, k * theta, theta, lambda, epsilon_tube);
}

SvrSolution svr_solve(const Eigen::MatrixXd& k_in, const Eigen::VectorXd& y, double lambda,
                      double epsilon_tube, const SvrOptions& options,
                      const std::optional<Eigen::VectorXd>& warm_theta) {
  check_svr_args(k_in, y, lambda, epsilon_tube);
  const Eigen::Index n = y.size();
  Eigen::MatrixXd k = k_in;
  k.diagonal().array() += options.jitter;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(k(i, i) > 0.0)) throw DomainError("Gram matrix has a non-positive diagonal entry");
  }

  SvrSolution sol;
  sol.theta = Eigen::VectorXd::Zero(n);
  if (warm_theta) {
    if (warm_theta->size() != n) throw ShapeError("warm start has wrong size");
    sol.theta = warm_theta->cwiseMax(-1.0).cwiseMin(1.0);
  }
  Eigen::VectorXd kt = k * sol.theta;
  double residual = residual_from(y, kt, sol.theta, lambda, epsilon_tube);

  for (long sweep = 0; sweep < options.max_sweeps && residual > options.tolerance; ++sweep) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double kii = k(i, i);
      const double g = y(i) - kt(i) / lambda;
      const double z = sol.theta(i) + lambda * g / kii;
      const double next = std::clamp(soft_threshold(z, lambda * epsilon_tube / kii), -1.0, 1.0);
      const double d = next - sol.theta(i);
      if (d != 0.0) {
        kt += d * k.col(i);
        sol.theta(i) = next;
      }
    }
    ++sol.sweeps;
    if (sol.sweeps % 64 == 0) kt = k * sol.theta;
    residual = residual_from(y, kt, sol.theta, lambda, epsilon_tube);

    if (residual > options.tolerance && sol.sweeps % 4 == 0) {
      Eigen::VectorXd candidate = sol.theta;
      if (polish(k, y, lambda, epsilon_tube, candidate)) {
        const Eigen::VectorXd kc = k * candidate;
        const double r = residual_from(y, kc, candidate, lambda, epsilon_tube);
        if (r < residual || dual_value(y, kc, candidate, lambda, epsilon_tube) >
                                dual_value(y, kt, sol.theta, lambda, epsilon_tube)) {
          sol.theta = candidate;
          kt = kc;
          residual = r;
        }
      }
    }
  }
  kt = k * sol.theta;
  residual = residual_from(y, kt, sol.theta, lambda, epsilon_tube);
  sol.kkt_residual = residual;
  sol.alpha = sol.theta / lambda;
  sol.objective = svr_objective(k, y, sol.alpha, lambda, epsilon_tube);
  if (residual > options.tolerance) {
    throw TrainingError("SVR did not converge: KKT residual " + std::to_string(residual),
                        residual);
  }
  return sol;
}

double SvrModel::predict(std::span<const double> x) const {
  double f = 0.0;
  for (std::size_t i = 0; i < alphas.size(); ++i) f += alphas[i] * kernel(training_inputs[i], x);
  return f;
}

SvrModel svr_train(const PointSet& inputs, std::span<const double> targets,
                   const KernelSpec& kernel, double lambda, double epsilon_tube,
                   const SvrOptions& options) {
  if (inputs.size() != targets.size()) throw ShapeError("inputs and targets differ in count");
  const Eigen::MatrixXd k = gram_matrix(inputs, kernel);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(
      targets.data(), static_cast<Eigen::Index>(targets.size()));
  const SvrSolution sol = svr_solve(k, y, lambda, epsilon_tube, options);

  SvrModel model;
  model.alphas.assign(sol.alpha.data(), sol.alpha.data() + sol.alpha.size());
  model.training_inputs = inputs;
  model.kernel = kernel;
  model.lambda = lambda;
  model.epsilon_tube = epsilon_tube;
  model.kkt_residual = sol.kkt_residual;
  model.objective = sol.objective;
  return model;
}

namespace {

struct PreimageObjective {
  const Eigen::VectorXd& v;
  const PointSet& targets;
  double gamma;

  // Returns 1 - 2 sum_i v_i exp(-|y - y_i|^2 / gamma); fills the gradient if asked.
  double operator()(const std::vector<double>& y, std::vector<double>* grad) const {
    if (grad) grad->assign(y.size(), 0.0);
    double s = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      double sq = 0.0;
      for (std::size_t d = 0; d < y.size(); ++d) {
        const double diff = y[d] - targets[i][d];
        sq += diff * diff;
      }
      const double w = v(static_cast<Eigen::Index>(i)) * std::exp(-sq / gamma);
      s += w;
      if (grad) {
        for (std::size_t d = 0; d < y.size(); ++d) {
          (*grad)[d] += 4.0 / gamma * w * (y[d] - targets[i][d]);
        }
      }
    }
    return 1.0 - 2.0 * s;
  }
};

std::vector<double> project_box(std::vector<double> y) {
  for (double& x : y) x = std::clamp(x, 0.0, 1.0);
  return y;
}

}  // namespace

PreimageResult solve_preimage(const Eigen::VectorXd& v, const PointSet& targets, double gamma,
                              const PreimageOptions& options) {
  if (targets.empty()) throw ShapeError("pre-image needs training targets");
  if (static_cast<std::size_t>(v.size()) != targets.size()) throw ShapeError("embedding and targets differ in size");
  if (!(gamma > 0.0)) throw DomainError("output kernel gamma must be positive");
  const std::size_t dim = targets.front().size();
  for (const auto& t : targets) {
    if (t.size() != dim) throw ShapeError("targets differ in dimension");
  }
  const PreimageObjective objective{v, targets, gamma};

  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    ranked.emplace_back(objective(project_box(targets[i]), nullptr), i);
  }
  const std::size_t top = std::min(options.starts, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(top),
                    ranked.end());

  std::vector<std::vector<double>> starts;
  std::vector<double> mean(dim, 0.0);
  for (std::size_t s = 0; s < top; ++s) {
    starts.push_back(project_box(targets[ranked[s].second]));
    for (std::size_t d = 0; d < dim; ++d) mean[d] += starts.back()[d] / static_cast<double>(top);
  }
  starts.push_back(mean);

  PreimageResult best;
  best.objective = std::numeric_limits<double>::infinity();
  bool all_failed = true;
  std::vector<double> grad;
  for (auto y : starts) {
    double value = objective(y, &grad);
    double step = 1.0;
    bool failed = false;
    for (int it = 0; it < options.max_steps; ++it) {
      std::vector<double> probe(dim);
      for (std::size_t d = 0; d < dim; ++d) probe[d] = y[d] - grad[d];
      probe = project_box(probe);
      double pg = 0.0;
      for (std::size_t d = 0; d < dim; ++d) pg += (y[d] - probe[d]) * (y[d] - probe[d]);
      if (std::sqrt(pg) <= options.gradient_tolerance) break;

      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt) {
        std::vector<double> trial(dim);
        for (std::size_t d = 0; d < dim; ++d) trial[d] = y[d] - step * grad[d];
        trial = project_box(trial);
        double decrease = 0.0;
        for (std::size_t d = 0; d < dim; ++d) decrease += grad[d] * (trial[d] - y[d]);
        const double trial_value = objective(trial, nullptr);
        if (trial_value <= value + 1e-4 * decrease && trial_value <= value) {
          y = std::move(trial);
          value = objective(y, &grad);
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        failed = true;
        break;
      }
      step = std::min(step * 2.0, 1e8);
    }
    all_failed = all_failed && failed;
    if (value < best.objective) {
      best.objective = value;
      best.y = y;
    }
  }
  best.line_search_failed = all_failed;
  return best;
}

Eigen::VectorXd OvkModel::embed(std::span<const double> x) const {
  const Eigen::VectorXd kx = kernel_vector(training_inputs, x, input_kernel);
  return t_n * (u * kx);
}

PreimageResult OvkModel::predict_detail(std::span<const double> x) const {
  return solve_preimage(embed(x), training_targets, output_kernel.gamma);
}

std::vector<double> OvkModel::predict(std::span<const double> x) const {
  return predict_detail(x).y;
}

Eigen::MatrixXd conditional_covariance(const Eigen::MatrixXd& k_n, const Eigen::MatrixXd& l_n,
                                       double eps_reg) {
  if (k_n.rows() != k_n.cols() || l_n.rows() != l_n.cols() || k_n.rows() != l_n.rows()) {
    throw ShapeError("input and output Gram matrices differ in shape");
  }
  if (!(eps_reg > 0.0)) throw DomainError("eps_reg must be positive");
  const auto n = k_n.rows();
  Eigen::MatrixXd a = k_n;
  a.diagonal().array() += static_cast<double>(n) * eps_reg;
  return l_n - a.ldlt().solve(k_n * l_n);
}

GmresResult solve_ovk_system(const Eigen::MatrixXd& k_n, const Eigen::MatrixXd& t_n,
                             double lambda, const GmresOptions& options) {
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
  const auto n = k_n.rows();
  const double shift = static_cast<double>(n) * lambda;
  const MatrixOperator op = [&](const Eigen::MatrixXd& x) -> Eigen::MatrixXd {
    return t_n * x * k_n + shift * x;
  };
  return global_gmres(op, Eigen::MatrixXd::Identity(n, n), Eigen::MatrixXd::Zero(n, n),
                      options);
}

OvkModel ovk_train(const PointSet& inputs, const PointSet& targets,
                   const KernelSpec& input_kernel, const KernelSpec& output_kernel,
                   double lambda, double eps_reg, const GmresOptions& options) {
  if (inputs.size() != targets.size()) throw ShapeError("inputs and targets differ in count");
  if (inputs.size() < 2) throw ShapeError("operator-valued regression needs at least two samples");
  if (output_kernel.kind != KernelKind::gaussian_output) {
    throw DomainError("output kernel must be Gaussian");
  }
  OvkModel model;
  model.training_inputs = inputs;
  model.training_targets = targets;
  model.input_kernel = input_kernel;
  model.output_kernel = output_kernel;
  model.lambda = lambda;
  model.eps_reg = eps_reg;
  model.k_n = gram_matrix(inputs, input_kernel);
  model.l_n = gram_matrix(targets, output_kernel);
  model.t_n = conditional_covariance(model.k_n, model.l_n, eps_reg);
  const GmresResult sol = solve_ovk_system(model.k_n, model.t_n, lambda, options);
  model.gmres_residual = sol.relative_residual;
  if (!sol.converged) {
    throw TrainingError("global GMRES stagnated at relative residual " +
                            std::to_string(sol.relative_residual),
                        sol.relative_residual);
  }
  model.u = sol.x;
  return model;
}

}  // namespace turing
