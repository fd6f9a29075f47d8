#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace turing {

enum class KernelKind { chi2_symmetric, chi2_exponential, wasserstein, gaussian_output };

std::string to_string(KernelKind kind);
/// Accepts the names produced by to_string; throws FormatError otherwise.
KernelKind kernel_kind_from_string(const std::string& name);

struct KernelSpec {
  KernelKind kind = KernelKind::wasserstein;
  double gamma = 1.0;

  bool needs_gamma() const { return kind != KernelKind::chi2_symmetric; }
  void validate() const;
  double operator()(std::span<const double> x, std::span<const double> y) const;
};

/// sum_i x_i y_i / (x_i + y_i); bins with x_i + y_i = 0 contribute 0.
double chi2_symmetric(std::span<const double> x, std::span<const double> y);

/// sum_i (x_i - y_i)^2 / (x_i + y_i); bins with x_i + y_i = 0 contribute 0.
double chi2_distance(std::span<const double> x, std::span<const double> y);
double chi2_exponential(std::span<const double> x, std::span<const double> y, double gamma);

/// Squared 2-Wasserstein distance between histograms on the bin indices 0..B-1,
/// through the quantile functions of both histograms.
double wasserstein_sq(std::span<const double> x, std::span<const double> y);
double wasserstein_kernel(std::span<const double> x, std::span<const double> y, double gamma);

double gaussian_output(std::span<const double> y, std::span<const double> y2, double gamma);

using PointSet = std::vector<std::vector<double>>;

Eigen::MatrixXd gram_matrix(const PointSet& points, const KernelSpec& spec);
/// Rows index `rows`, columns index `cols`.
Eigen::MatrixXd cross_gram(const PointSet& rows, const PointSet& cols, const KernelSpec& spec);
/// (k(x, x_1), ..., k(x, x_n)).
Eigen::VectorXd kernel_vector(const PointSet& points, std::span<const double> x,
                              const KernelSpec& spec);

}  // namespace turing
