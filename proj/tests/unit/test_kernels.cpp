#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <random>

#include "oracles.hpp"
#include "turing/error.hpp"
#include "turing/kernels.hpp"

using namespace turing;

namespace {

std::vector<double> delta_mass(std::size_t bins, std::size_t at) {
  std::vector<double> h(bins, 0.0);
  h[at] = 1.0;
  return h;
}

}  // namespace

TEST_CASE("chi-square kernels") {
  const std::vector<double> x{0.5, 0.5, 0.0}, y{0.0, 0.5, 0.5};
  CHECK(chi2_symmetric(x, x) == doctest::Approx(0.5));
  CHECK(chi2_symmetric(delta_mass(4, 0), delta_mass(4, 3)) == 0.0);
  CHECK(chi2_symmetric(x, y) == doctest::Approx(0.25));
  CHECK(chi2_exponential(x, x, 1.0) == 1.0);
  CHECK(chi2_exponential(delta_mass(4, 0), delta_mass(4, 3), 1.0) == doctest::Approx(std::exp(-2.0)));
  CHECK(chi2_exponential(x, y, 1.0) == doctest::Approx(std::exp(-1.0)));
  // Bins empty in both histograms contribute nothing.
  const std::vector<double> a{0.3, 0.7, 0.0, 0.0}, b{0.6, 0.4, 0.0, 0.0};
  const std::vector<double> a2{0.3, 0.7}, b2{0.6, 0.4};
  CHECK(chi2_distance(a, b) == chi2_distance(a2, b2));
  CHECK(std::isfinite(chi2_symmetric(a, b)));
  CHECK_THROWS_AS(chi2_symmetric(a, a2), ShapeError);
}

TEST_CASE("wasserstein examples") {
  CHECK(wasserstein_sq(delta_mass(5, 0), delta_mass(5, 2)) == 4.0);
  CHECK(wasserstein_sq(delta_mass(5, 1), delta_mass(5, 1)) == 0.0);
  CHECK(wasserstein_kernel(delta_mass(5, 0), delta_mass(5, 2), 4.0) == doctest::Approx(std::exp(-1.0)));
  const std::vector<double> x{0.2, 0.3, 0.5};
  CHECK(wasserstein_kernel(x, x, 0.7) == 1.0);
  double last = 0.0;
  for (double gamma : {0.1, 1.0, 10.0, 100.0, 1e4}) {
    const double k = wasserstein_kernel(delta_mass(5, 0), delta_mass(5, 4), gamma);
    CHECK(k > last);
    last = k;
  }
  CHECK(last <= 1.0);
  CHECK_THROWS_AS(wasserstein_sq(std::vector<double>{1.0, 0.0}, std::vector<double>{0.5, 0.0}),
                  DomainError);
}

TEST_CASE("wasserstein matches exact transport") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t b = 2 + trial % 7;
    const auto x = oracle::random_histogram(b, rng);
    const auto y = oracle::random_histogram(b, rng);
    CHECK(std::abs(wasserstein_sq(x, y) - oracle::transport_cost(x, y)) <= 1e-8);
  }
}

TEST_CASE("wasserstein distance is a metric") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = oracle::random_histogram(12, rng);
    const auto y = oracle::random_histogram(12, rng);
    const auto z = oracle::random_histogram(12, rng);
    const double xy = std::sqrt(wasserstein_sq(x, y));
    const double yz = std::sqrt(wasserstein_sq(y, z));
    const double xz = std::sqrt(wasserstein_sq(x, z));
    CHECK(xz <= xy + yz + 1e-10);
    CHECK(wasserstein_sq(x, y) == doctest::Approx(wasserstein_sq(y, x)).epsilon(1e-12));
  }
}

TEST_CASE("output gaussian kernel") {
  const std::vector<double> y{0.1, 0.2}, z{0.4, 0.6};
  CHECK(gaussian_output(y, y, 0.3) == 1.0);
  CHECK(gaussian_output(y, z, 0.25) == doctest::Approx(std::exp(-1.0)));
  const std::vector<double> y2{0.2, 0.4}, z2{0.8, 1.2};
  CHECK(gaussian_output(y2, z2, 0.25) == doctest::Approx(std::exp(-4.0)));
}

TEST_CASE("kernels are symmetric and monotone in their distances") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = oracle::random_histogram(8, rng);
    const auto y = oracle::random_histogram(8, rng);
    for (KernelKind kind : {KernelKind::chi2_symmetric, KernelKind::chi2_exponential,
                            KernelKind::wasserstein, KernelKind::gaussian_output}) {
      const KernelSpec k{kind, 0.8};
      CHECK(k(x, y) == doctest::Approx(k(y, x)).epsilon(1e-14));
    }
    const auto z = oracle::random_histogram(8, rng);
    if (chi2_distance(x, y) < chi2_distance(x, z)) {
      CHECK(chi2_exponential(x, y, 0.5) >= chi2_exponential(x, z, 0.5));
    }
    if (wasserstein_sq(x, y) < wasserstein_sq(x, z)) {
      CHECK(wasserstein_kernel(x, y, 0.5) >= wasserstein_kernel(x, z, 0.5));
    }
  }
}

TEST_CASE("gram matrices") {
  std::mt19937_64 rng(43);
  PointSet pts;
  for (int i = 0; i < 10; ++i) pts.push_back(oracle::random_histogram(12, rng));
  const KernelSpec w{KernelKind::wasserstein, 2.0};
  const Eigen::MatrixXd k = gram_matrix(pts, w);
  CHECK((k - k.transpose()).norm() == 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
  CHECK(es.eigenvalues().minCoeff() >= -1e-8);

  const PointSet one{pts[0]};
  CHECK(gram_matrix(one, w)(0, 0) == 1.0);
  const KernelSpec chi{KernelKind::chi2_symmetric, 1.0};
  CHECK(gram_matrix(one, chi)(0, 0) == doctest::Approx(0.5));

  PointSet dup{pts[0], pts[1], pts[0]};
  const Eigen::MatrixXd kd = gram_matrix(dup, w);
  CHECK(kd.row(0) == kd.row(2));
  CHECK(kd.fullPivLu().rank() == 2);

  const Eigen::MatrixXd cross = cross_gram(dup, pts, w);
  CHECK(cross.rows() == 3);
  CHECK(cross.cols() == 10);
  const Eigen::VectorXd kv = kernel_vector(pts, pts[3], w);
  for (Eigen::Index i = 0; i < 10; ++i) CHECK(kv(i) == k(i, 3));
}

TEST_CASE("kernel names and validation") {
  for (KernelKind kind : {KernelKind::chi2_symmetric, KernelKind::chi2_exponential,
                          KernelKind::wasserstein, KernelKind::gaussian_output}) {
    CHECK(kernel_kind_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(kernel_kind_from_string("rbf"), FormatError);
  CHECK_THROWS((KernelSpec{KernelKind::wasserstein, 0.0}.validate()));
  CHECK_NOTHROW((KernelSpec{KernelKind::chi2_symmetric, 0.0}.validate()));
}
