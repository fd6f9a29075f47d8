#pragma once

#include <Eigen/Dense>

#include <functional>

namespace turing {

struct GmresOptions {
  int restart = 50;
  int max_restarts = 20;
  double tolerance = 1e-8;  ///< on ||B - A(X)||_F / ||B||_F
};

struct GmresResult {
  Eigen::MatrixXd x;
  double relative_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

using MatrixOperator = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

/// Restarted global GMRES for A(X) = B with a linear operator on matrices; Krylov
/// bases are orthonormal in the trace inner product <A, B> = tr(A^T B).
GmresResult global_gmres(const MatrixOperator& op, const Eigen::MatrixXd& b,
                         const Eigen::MatrixXd& x0, const GmresOptions& options = {});

}  // namespace turing
