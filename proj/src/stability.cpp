#include "turing/stability.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "turing/error.hpp"

namespace turing {

void GmParams::validate() const {
  const auto finite = [](double x) { return std::isfinite(x); };
  if (!(finite(a) && finite(b) && finite(c) && finite(delta) && finite(s))) {
    throw DomainError("Gierer-Meinhardt parameters must be finite");
  }
  if (!(b > 0.0 && delta > 0.0 && s > 0.0)) {
    throw DomainError("Gierer-Meinhardt parameters b, delta and s must be positive");
  }
  if (a < 0.0 || c < 0.0) {
    throw DomainError("Gierer-Meinhardt parameters a and c must be non-negative");
  }
}

GmParams GmParams::from_array(std::span<const double> v) {
  if (v.size() != 5) throw ShapeError("expected five values a,b,c,delta,s");
  return GmParams{v[0], v[1], v[2], v[3], v[4]};
}

void ReactionModel::validate() const {
  if (species_count == 0) throw DomainError("reaction model needs at least one species");
  if (!reaction) throw DomainError("reaction model has no reaction term");
  if (diffusion.size() != species_count) {
    throw ShapeError("diffusion has " + std::to_string(diffusion.size()) +
                     " entries for " + std::to_string(species_count) + " species");
  }
  for (double d : diffusion) {
    if (!(d > 0.0) || !std::isfinite(d)) throw DomainError("diffusion entries must be positive");
  }
}

namespace {

Eigen::Matrix2d gm_jacobian(const GmParams& p, double u1, double u2) {
  const double q = 1.0 + p.c * u1 * u1;
  Eigen::Matrix2d j;
  j(0, 0) = -p.b + 2.0 * u1 / (u2 * q * q);
  j(0, 1) = -u1 * u1 / (u2 * u2 * q);
  j(1, 0) = 2.0 * u1;
  j(1, 1) = -1.0;
  return j;
}

void check_positive(std::span<const double> u) {
  for (double x : u) {
    if (!(x > 0.0)) throw DomainError("Gierer-Meinhardt concentrations must be positive");
  }
}

}  // namespace

ReactionModel gierer_meinhardt_model(const GmParams& p) {
  p.validate();
  ReactionModel model;
  model.species_count = 2;
  model.reaction = [p](std::span<const double> u, std::span<double> out) {
    const double u1 = u[0];
    const double u2 = u[1];
    const double sq = u1 * u1;
    out[0] = p.a - p.b * u1 + sq / (u2 * (1.0 + p.c * sq));
    out[1] = sq - u2;
  };
  model.jacobian = [p](std::span<const double> u) -> Eigen::MatrixXd {
    check_positive(u);
    return gm_jacobian(p, u[0], u[1]);
  };
  model.diffusion = {p.s, p.s * p.delta};
  return model;
}

std::array<double, 2> gm_reaction(const GmParams& p, std::array<double, 2> u) {
  check_positive(u);
  const double sq = u[0] * u[0];
  return {p.a - p.b * u[0] + sq / (u[1] * (1.0 + p.c * sq)), sq - u[1]};
}

std::array<double, 2> gm_equilibrium(const GmParams& p) {
  p.validate();
  // On the nullcline u2 = u1^2 the first component reduces to g below.
  const auto g = [&](double u) { return p.a - p.b * u + 1.0 / (1.0 + p.c * u * u); };
  const auto dg = [&](double u) {
    const double q = 1.0 + p.c * u * u;
    return -p.b - 2.0 * p.c * u / (q * q);
  };

  const double lo_end = 1e-8;
  const double hi_end = (1.0 + p.a) / p.b + 1.0;
  constexpr int kPieces = 4096;
  double lo = lo_end;
  double g_lo = g(lo);
  double hi = lo;
  bool bracketed = false;
  for (int k = 1; k <= kPieces; ++k) {
    hi = lo_end + (hi_end - lo_end) * k / kPieces;
    const double g_hi = g(hi);
    if (g_hi == 0.0) return {hi, hi * hi};
    if ((g_lo > 0.0) != (g_hi > 0.0)) {
      bracketed = true;
      break;
    }
    lo = hi;
    g_lo = g_hi;
  }
  if (!bracketed) {
    throw NoEquilibriumError("no positive equilibrium in (1e-8, (1+a)/b + 1)");
  }

  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double g_mid = g(mid);
    if (g_mid == 0.0) {
      lo = hi = mid;
      break;
    }
    if ((g_mid > 0.0) == (g_lo > 0.0)) {
      lo = mid;
      g_lo = g_mid;
    } else {
      hi = mid;
    }
  }
  double u = 0.5 * (lo + hi);
  for (int it = 0; it < 5; ++it) {
    const double step = g(u) / dg(u);
    const double next = u - step;
    if (!(next > 0.0) || !std::isfinite(next)) break;
    if (std::abs(g(next)) >= std::abs(g(u))) break;
    u = next;
  }
  return {u, u * u};
}

Eigen::MatrixXd jacobian(const ReactionModel& model, std::span<const double> u) {
  model.validate();
  if (u.size() != model.species_count) throw ShapeError("state size does not match species count");
  if (model.jacobian) return model.jacobian(u);

  const std::size_t n = model.species_count;
  Eigen::MatrixXd j(n, n);
  std::vector<double> x(u.begin(), u.end());
  std::vector<double> fp(n), fm(n);
  for (std::size_t col = 0; col < n; ++col) {
    const double step = 1e-6 * std::max(1.0, std::abs(u[col]));
    x[col] = u[col] + step;
    model.reaction(x, fp);
    x[col] = u[col] - step;
    model.reaction(x, fm);
    x[col] = u[col];
    for (std::size_t row = 0; row < n; ++row) j(row, col) = (fp[row] - fm[row]) / (2.0 * step);
  }
  return j;
}

namespace {

double max_real_eigenvalue(const Eigen::MatrixXd& m) {
  if (m.rows() == 2) {
    const double tr = m(0, 0) + m(1, 1);
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    const double disc = 0.25 * tr * tr - det;
    return 0.5 * tr + (disc > 0.0 ? std::sqrt(disc) : 0.0);
  }
  if (m.rows() == 1) return m(0, 0);
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
  return solver.eigenvalues().real().maxCoeff();
}

double dispersion_from_jacobian(const Eigen::MatrixXd& j, const std::vector<double>& diffusion,
                                double q2) {
  Eigen::MatrixXd shifted = j;
  for (std::size_t i = 0; i < diffusion.size(); ++i) {
    shifted(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) -= q2 * diffusion[i];
  }
  return max_real_eigenvalue(shifted);
}

struct ScanSetup {
  Eigen::MatrixXd j;
  double q2_max;
  std::vector<double> grid;
};

ScanSetup make_scan(const ReactionModel& model, std::span<const double> u_star,
                    const DispersionScan& scan) {
  ScanSetup setup;
  setup.j = jacobian(model, u_star);
  const double tr = setup.j.trace();
  const double det = setup.j.determinant();
  const double d_min = *std::min_element(model.diffusion.begin(), model.diffusion.end());
  setup.q2_max = 10.0 * (std::abs(tr) + std::abs(det) + 1.0) / d_min;
  const std::size_t n = std::max<std::size_t>(scan.points, 2);
  setup.grid.resize(n);
  const double lmin = std::log(scan.q2_min);
  const double lmax = std::log(setup.q2_max);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(n - 1);
    setup.grid[k] = std::exp(lmin + t * (lmax - lmin));
  }
  setup.grid.back() = setup.q2_max;
  return setup;
}

}  // namespace

double dispersion(const ReactionModel& model, std::span<const double> u_star, double q2) {
  if (!(q2 >= 0.0)) throw DomainError("squared wavenumber must be non-negative");
  return dispersion_from_jacobian(jacobian(model, u_star), model.diffusion, q2);
}

std::vector<std::array<double, 2>> dispersion_curve(const ReactionModel& model,
                                                    std::span<const double> u_star,
                                                    const DispersionScan& scan) {
  const ScanSetup setup = make_scan(model, u_star, scan);
  std::vector<std::array<double, 2>> curve;
  curve.reserve(setup.grid.size());
  for (double q2 : setup.grid) {
    curve.push_back({q2, dispersion_from_jacobian(setup.j, model.diffusion, q2)});
  }
  return curve;
}

StabilityReport turing_check(const ReactionModel& model, std::span<const double> u_star,
                             const DispersionScan& scan) {
  model.validate();
  if (u_star.size() != model.species_count) throw ShapeError("equilibrium has wrong size");
  std::vector<double> f(model.species_count);
  model.reaction(u_star, f);
  double residual = 0.0;
  for (double x : f) residual = std::max(residual, std::abs(x));
  if (!(residual <= scan.residual_tolerance)) {
    throw PreconditionError("equilibrium residual " + std::to_string(residual) +
                            " exceeds tolerance");
  }

  const ScanSetup setup = make_scan(model, u_star, scan);
  const auto disp = [&](double q2) {
    return dispersion_from_jacobian(setup.j, model.diffusion, q2);
  };

  StabilityReport report;
  report.equilibrium.assign(u_star.begin(), u_star.end());
  report.q2_max = setup.q2_max;
  report.ode_stable = max_real_eigenvalue(setup.j) < 0.0;

  std::size_t best = 0;
  double best_value = disp(setup.grid[0]);
  for (std::size_t k = 1; k < setup.grid.size(); ++k) {
    const double v = disp(setup.grid[k]);
    if (v > best_value) {
      best_value = v;
      best = k;
    }
  }

  // Golden-section refinement in log(q2) between the neighbours of the grid maximum.
  double lo = std::log(setup.grid[best == 0 ? 0 : best - 1]);
  double hi = std::log(setup.grid[std::min(best + 1, setup.grid.size() - 1)]);
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - ratio * (hi - lo);
  double x2 = lo + ratio * (hi - lo);
  double f1 = disp(std::exp(x1));
  double f2 = disp(std::exp(x2));
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = disp(std::exp(x2));
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = disp(std::exp(x1));
    }
  }
  double refined_q2 = std::exp(0.5 * (lo + hi));
  double refined = disp(refined_q2);
  if (refined < best_value) {
    refined = best_value;
    refined_q2 = setup.grid[best];
  }

  report.max_growth = refined;
  const bool decays_at_end = disp(setup.q2_max) < 0.0;
  report.turing = report.ode_stable && refined > 0.0 && decays_at_end;
  report.q2_star = report.turing ? refined_q2 : 0.0;
  return report;
}

StabilityReport turing_check(const GmParams& p, const DispersionScan& scan) {
  const auto u = gm_equilibrium(p);
  return turing_check(gierer_meinhardt_model(p), u, scan);
}

}  // namespace turing
