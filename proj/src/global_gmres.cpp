#include "turing/global_gmres.hpp"

#include <cmath>
#include <vector>

#include "turing/error.hpp"

namespace turing {

namespace {

double trace_inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a.array() * b.array()).sum();
}

}  // namespace

GmresResult global_gmres(const MatrixOperator& op, const Eigen::MatrixXd& b,
                         const Eigen::MatrixXd& x0, const GmresOptions& options) {
  if (b.rows() != x0.rows() || b.cols() != x0.cols()) {
    throw ShapeError("initial guess and right-hand side differ in shape");
  }
  if (options.restart < 1 || options.max_restarts < 1 || !(options.tolerance > 0.0)) {
    throw DomainError("invalid GMRES options");
  }

  GmresResult result;
  result.x = x0;
  const double b_norm = b.norm();
  if (b_norm == 0.0) {
    result.x.setZero();
    result.converged = true;
    return result;
  }

  const int m = options.restart;
  for (int cycle = 0; cycle < options.max_restarts; ++cycle) {
    Eigen::MatrixXd r = b - op(result.x);
    const double beta = r.norm();
    result.relative_residual = beta / b_norm;
    if (result.relative_residual <= options.tolerance) {
      result.converged = true;
      return result;
    }

    std::vector<Eigen::MatrixXd> v;
    v.reserve(static_cast<std::size_t>(m) + 1);
    v.push_back(r / beta);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m + 1, m);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m + 1);
    g(0) = beta;
    std::vector<double> cs(static_cast<std::size_t>(m)), sn(static_cast<std::size_t>(m));

    int k = 0;
    for (; k < m; ++k) {
      Eigen::MatrixXd w = op(v[static_cast<std::size_t>(k)]);
      for (int i = 0; i <= k; ++i) {
        h(i, k) = trace_inner(v[static_cast<std::size_t>(i)], w);
        w -= h(i, k) * v[static_cast<std::size_t>(i)];
      }
      h(k + 1, k) = w.norm();

      for (int i = 0; i < k; ++i) {
        const double t = cs[i] * h(i, k) + sn[i] * h(i + 1, k);
        h(i + 1, k) = -sn[i] * h(i, k) + cs[i] * h(i + 1, k);
        h(i, k) = t;
      }
      const double denom = std::hypot(h(k, k), h(k + 1, k));
      const double breakdown = h(k + 1, k);
      cs[k] = denom == 0.0 ? 1.0 : h(k, k) / denom;
      sn[k] = denom == 0.0 ? 0.0 : h(k + 1, k) / denom;
      h(k, k) = denom;
      h(k + 1, k) = 0.0;
      g(k + 1) = -sn[k] * g(k);
      g(k) = cs[k] * g(k);
      ++result.iterations;

      const bool done = std::abs(g(k + 1)) / b_norm <= options.tolerance;
      if (done || breakdown <= 1e-14 * beta) {
        ++k;
        break;
      }
      v.push_back(w / breakdown);
    }

    const Eigen::VectorXd y =
        h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    for (int i = 0; i < k; ++i) result.x += y(i) * v[static_cast<std::size_t>(i)];
  }

  result.relative_residual = (b - op(result.x)).norm() / b_norm;
  result.converged = result.relative_residual <= options.tolerance;
  return result;
}

}  // namespace turing
