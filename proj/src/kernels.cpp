#include "turing/kernels.hpp"

#include <cmath>

#include "turing/error.hpp"

namespace turing {

namespace {

void check_dims(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw ShapeError("dimension mismatch: " + std::to_string(x.size()) + " vs " +
                     std::to_string(y.size()));
  }
}

void check_gamma(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("kernel gamma must be positive");
}

}  // namespace

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::chi2_symmetric: return "chi2_symmetric";
    case KernelKind::chi2_exponential: return "chi2_exponential";
    case KernelKind::wasserstein: return "wasserstein";
    case KernelKind::gaussian_output: return "gaussian_output";
  }
  return "unknown";
}

KernelKind kernel_kind_from_string(const std::string& name) {
  for (auto kind : {KernelKind::chi2_symmetric, KernelKind::chi2_exponential,
                    KernelKind::wasserstein, KernelKind::gaussian_output}) {
    if (to_string(kind) == name) return kind;
  }
  throw FormatError("unknown kernel '" + name + "'");
}

void KernelSpec::validate() const {
  if (needs_gamma()) check_gamma(gamma);
}

double KernelSpec::operator()(std::span<const double> x, std::span<const double> y) const {
  switch (kind) {
    case KernelKind::chi2_symmetric: return chi2_symmetric(x, y);
    case KernelKind::chi2_exponential: return chi2_exponential(x, y, gamma);
    case KernelKind::wasserstein: return wasserstein_kernel(x, y, gamma);
    case KernelKind::gaussian_output: return gaussian_output(x, y, gamma);
  }
  throw DomainError("unknown kernel kind");
}

double chi2_symmetric(std::span<const double> x, std::span<const double> y) {
  check_dims(x, y);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double denom = x[i] + y[i];
    if (denom != 0.0) sum += x[i] * y[i] / denom;
  }
  return sum;
}

double chi2_distance(std::span<const double> x, std::span<const double> y) {
  check_dims(x, y);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double denom = x[i] + y[i];
    const double diff = x[i] - y[i];
    if (denom != 0.0) sum += diff * diff / denom;
  }
  return sum;
}

double chi2_exponential(std::span<const double> x, std::span<const double> y, double gamma) {
  check_gamma(gamma);
  return std::exp(-chi2_distance(x, y) / gamma);
}

double wasserstein_sq(std::span<const double> x, std::span<const double> y) {
  check_dims(x, y);
  if (x.empty()) return 0.0;
  double total_x = 0.0;
  double total_y = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 0.0 || y[i] < 0.0) throw DomainError("histograms must be nonnegative");
    total_x += x[i];
    total_y += y[i];
  }
  if (std::abs(total_x - total_y) > 1e-9) throw DomainError("histograms have different mass");

  // Walk both cumulative distributions; between consecutive breakpoints the quantile
  // functions are the constant bin indices i and j.
  const std::size_t b = x.size();
  std::size_t i = 0;
  std::size_t j = 0;
  double rest_x = x[0];
  double rest_y = y[0];
  double cost = 0.0;
  while (i < b && j < b) {
    if (rest_x <= 0.0) {
      if (++i < b) rest_x = x[i];
      continue;
    }
    if (rest_y <= 0.0) {
      if (++j < b) rest_y = y[j];
      continue;
    }
    const double moved = std::min(rest_x, rest_y);
    const double d = static_cast<double>(i) - static_cast<double>(j);
    cost += moved * d * d;
    rest_x -= moved;
    rest_y -= moved;
  }
  return cost;
}

double wasserstein_kernel(std::span<const double> x, std::span<const double> y, double gamma) {
  check_gamma(gamma);
  return std::exp(-wasserstein_sq(x, y) / gamma);
}

double gaussian_output(std::span<const double> y, std::span<const double> y2, double gamma) {
  check_dims(y, y2);
  check_gamma(gamma);
  double sq = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) sq += (y[i] - y2[i]) * (y[i] - y2[i]);
  return std::exp(-sq / gamma);
}

Eigen::MatrixXd gram_matrix(const PointSet& points, const KernelSpec& spec) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      k(i, j) = spec(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)]);
      k(j, i) = k(i, j);
    }
  }
  return k;
}

Eigen::MatrixXd cross_gram(const PointSet& rows, const PointSet& cols, const KernelSpec& spec) {
  spec.validate();
  Eigen::MatrixXd k(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = spec(rows[i], cols[j]);
    }
  }
  return k;
}

Eigen::VectorXd kernel_vector(const PointSet& points, std::span<const double> x,
                              const KernelSpec& spec) {
  spec.validate();
  Eigen::VectorXd k(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    k(static_cast<Eigen::Index>(i)) = spec(points[i], x);
  }
  return k;
}

}  // namespace turing
