// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Usage: acceptance [name-substring...]

#include <Eigen/Dense>

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "turing/error.hpp"
#include "turing/features.hpp"
#include "turing/grid_spectral.hpp"
#include "turing/kernel_regression.hpp"
#include "turing/kernels.hpp"
#include "turing/neural.hpp"
#include "turing/pipeline.hpp"
#include "turing/simulator.hpp"
#include "turing/stability.hpp"

using namespace turing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, x);
  return buf;
}

void note(const std::string& msg) { std::fprintf(stderr, "  .. %s\n", msg.c_str()); }

Eigen::VectorXd as_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

const GmParams kPatterned{0.01, 1.2, 0.7, 40.0, 1.0};

SimConfig desk_sim() {
  SimConfig c = SimConfig::for_grid(64);
  c.h = 0.2;
  c.t_final = 2000.0;
  return c;
}

// ---------------------------------------------------------------------------

Outcome spectral_solver() {
  const std::size_t n = 8;
  const TorusGrid g(n);
  const Eigen::MatrixXd l = oracle::torus_laplacian(n);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0.0, 1.0);
  double worst = 0.0;
  for (double hd : {0.2 * 1.0, 0.2 * 40.0, 8.0}) {
    const SpectralOperator op(g, hd);
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd::Identity(64, 64) + hd * l);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> b(g.nodes());
      for (double& x : b) x = nd(rng);
      const Eigen::VectorXd expect = lu.solve(as_vec(b));
      const Eigen::VectorXd got = as_vec(op.solve(b));
      worst = std::max(worst, (got - expect).norm() / expect.norm());
    }
  }
  return {worst <= 1e-10, "max_rel_err=" + fmt("%.3g", worst)};
}

Outcome turing_verdicts() {
  const StabilityReport patterned = turing_check(kPatterned);
  bool ok = patterned.turing && patterned.max_growth > 0.0 && patterned.q2_star > 0.0 &&
            std::isfinite(patterned.q2_star) && patterned.q2_star < patterned.q2_max;
  std::string d = "patterned turing=" + std::string(patterned.turing ? "true" : "false") +
                  " q2_star=" + fmt("%.4g", patterned.q2_star) + " growth=" + fmt("%.3g", patterned.max_growth);
  for (double delta : {50.0, 100.0}) {
    const StabilityReport r = turing_check(GmParams{0.02, 1.0, 1.2, delta, 0.5});
    ok = ok && !r.turing;
    d += " homogeneous(delta=" + fmt("%g", delta) + ") turing=" + (r.turing ? "true" : "false");
  }
  return {ok, d};
}

Outcome simulation_dichotomy() {
  const TorusGrid g(64);
  SimConfig c = desk_sim();
  c.seed = 7;
  const PatternField p1 = simulate(kPatterned, g, c);
  const PatternField p2 = simulate(GmParams{0.02, 1.0, 1.2, 50.0, 0.5}, g, c);
  const double cv1 = coefficient_of_variation(p1.field(0));
  const double cv2 = coefficient_of_variation(p2.field(0));
  return {cv1 > 0.1 && cv2 < 1e-3,
          "patterned cv=" + fmt("%.4g", cv1) + " converged=" + (p1.converged ? "1" : "0") +
              " t=" + fmt("%g", p1.elapsed_time) + "; homogeneous cv=" + fmt("%.3g", cv2) +
              " converged=" + (p2.converged ? "1" : "0")};
}

Outcome resistance_oracle() {
  std::mt19937_64 rng(4);
  std::bernoulli_distribution coin(0.5);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    PatternGraph g;
    g.grid = TorusGrid(trial % 2 ? 4 : 3);
    g.right.resize(g.grid.nodes());
    g.down.resize(g.grid.nodes());
    for (auto& w : g.right) w = coin(rng) ? 1.0 : 0.003;
    for (auto& w : g.down) w = coin(rng) ? 1.0 : 0.003;
    std::vector<oracle::Edge> edges;
    for (NodeId v = 0; v < g.grid.nodes(); ++v) {
      edges.push_back({v, g.grid.right(v), g.right[v]});
      edges.push_back({v, g.grid.down(v), g.down[v]});
    }
    const std::size_t m = g.grid.nodes();
    const Eigen::MatrixXd lp = oracle::pseudoinverse_sym(oracle::weighted_laplacian(m, edges));
    const ResistanceSolver s(g);
    for (std::size_t v = 0; v < m; ++v) {
      for (std::size_t w = 0; w < m; ++w) {
        const double ref = oracle::pinv_resistance(lp, v, w);
        worst = std::max(worst, std::abs(s.resistance(v, w) - ref) / std::max(1.0, ref));
      }
    }
  }
  double series = 0.0;
  int exact = 0;
  const std::vector<double> weights{1.0, 0.5, 0.25, 2.0, 0.003, 0.7};
  for (double w : weights) {
    Eigen::MatrixXd l(2, 2);
    l << w, -w, -w, w;
    const double r = ResistanceSolver(l).resistance(0, 1);
    series = std::max(series, std::abs(r - 1.0 / w) * w);
    exact += r == 1.0 / w;
  }
  return {worst <= 1e-8 && series <= 1e-12,
          "max_err=" + fmt("%.3g", worst) + " two_node_rel_err=" + fmt("%.3g", series) +
              " exact=" + std::to_string(exact) + "/" + std::to_string(weights.size())};
}

std::vector<double> transformed(const TorusGrid& g, std::span<const double> f, int kind) {
  const std::size_t n = g.side();
  std::vector<double> out(f.size());
  const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
  for (NodeId v = 0; v < g.nodes(); ++v) {
    const std::size_t r = g.row(v), c = g.col(v);
    switch (kind) {
      case 0: out[g.node((r + 17) % n, (c + 40) % n)] = f[v]; break;
      case 1: out[g.node(c, n - 1 - r)] = f[v]; break;
      case 2: out[v] = f[v] + 0.75; break;
      case 3: out[v] = 2.0 * f[v]; break;
      default: out[v] = *hi + *lo - f[v]; break;
    }
  }
  return out;
}

Outcome rdh_invariance() {
  const char* names[] = {"translation", "rotation", "shift", "scale", "reflection"};
  SamplingPlan plan = SamplingPlan::single_parameter(10);
  plan.seed = 505;
  std::mt19937_64 rng(plan.seed);
  const TorusGrid g(64);
  std::vector<PatternField> pats(10);
  std::vector<GmParams> params;
  while (params.size() < 10) {
    const GmParams p = plan.draw(rng);
    if (turing_check(p).turing) params.push_back(p);
  }
  parallel_for(10, 0, [&](std::size_t i) {
    SimConfig c = desk_sim();
    c.seed = 1000 + i;
    pats[i] = simulate(params[i], g, c);
  });
  const std::vector<double> radii{8.0, 32.0};
  FeatureSettings fs;
  fs.radii = radii;
  std::vector<std::vector<double>> quantiles(10);
  parallel_for(10, 0, [&](std::size_t i) {
    for (auto& values : pattern_resistances(pats[i], fs)) {
      quantiles[i].push_back(empirical_quantile(values, 0.99));
    }
  });
  std::vector<double> r_max(2, 0.0);
  for (const auto& q : quantiles) {
    for (std::size_t r = 0; r < 2; ++r) r_max[r] = std::max(r_max[r], q[r]);
  }
  std::array<std::atomic<int>, 5> broken{};
  parallel_for(10, 0, [&](std::size_t i) {
    const ResistanceSolver original(build_pattern_graph(pats[i], 0, 0.003));
    std::vector<std::vector<double>> ref(2);
    for (std::size_t r = 0; r < 2; ++r) {
      ref[r] = compute_rdh(original, g, RdhConfig{radii[r], 1, 12, r_max[r]}).values;
    }
    for (int kind = 0; kind < 5; ++kind) {
      const auto f = transformed(g, pats[i].field(0), kind);
      const ResistanceSolver solver(build_pattern_graph(g, f, 0.003));
      for (std::size_t r = 0; r < 2; ++r) {
        const RdhConfig cfg{radii[r], 1, 12, r_max[r]};
        if (compute_rdh(solver, g, cfg).values != ref[r]) {
          ++broken[static_cast<std::size_t>(kind)];
        }
      }
    }
  });
  std::string d = "r_max(8)=" + fmt("%.4g", r_max[0]) + " r_max(32)=" + fmt("%.4g", r_max[1]);
  bool ok = true;
  for (int k = 0; k < 5; ++k) {
    d += std::string(" ") + names[k] + "=" + std::to_string(20 - broken[k]) + "/20";
    ok = ok && broken[k] == 0;
  }
  return {ok, d};
}

Outcome wasserstein_oracle() {
  std::mt19937_64 rng(6);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t b = 2 + trial % 7;
    const auto x = oracle::random_histogram(b, rng, trial % 3 == 0 ? 0.3 : 0.0);
    const auto y = oracle::random_histogram(b, rng, trial % 5 == 0 ? 0.3 : 0.0);
    worst = std::max(worst, std::abs(wasserstein_sq(x, y) - oracle::transport_cost(x, y)));
  }
  std::vector<double> d1(8, 0.0), d3(8, 0.0);
  d1[0] = 1.0;
  d3[2] = 1.0;
  const double delta = wasserstein_sq(d1, d3);
  return {worst <= 1e-8 && delta == 4.0,
          "max_err=" + fmt("%.3g", worst) + " delta_pair=" + fmt("%.17g", delta)};
}

std::vector<double> bump(double t, std::size_t bins) {
  std::vector<double> h(bins);
  double total = 0.0;
  for (std::size_t k = 0; k < bins; ++k) {
    const double x = (static_cast<double>(k) + 0.5) / static_cast<double>(bins);
    h[k] = std::exp(-std::pow((x - t) / 0.15, 2));
    total += h[k];
  }
  for (double& v : h) v /= total;
  return h;
}

Outcome svr_correctness() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd(0.0, 1.0);
  double worst_rel = 0.0;
  double worst_kkt = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd f(5, 3);
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = nd(rng);
    const Eigen::MatrixXd k = f * f.transpose() + 0.1 * Eigen::MatrixXd::Identity(5, 5);
    Eigen::VectorXd y(5);
    for (Eigen::Index i = 0; i < 5; ++i) y(i) = nd(rng);
    const double lambda = std::pow(10.0, -2.0 + 0.15 * trial);
    const double eps = 0.05 * (trial % 4);
    const SvrSolution s = svr_solve(k, y, lambda, eps);
    const double ref = oracle::svr_reference_value(k, y, lambda, eps);
    worst_rel = std::max(worst_rel, std::abs(s.objective - ref) / std::max(std::abs(ref), 1e-12));
    worst_kkt = std::max(worst_kkt, s.kkt_residual);
  }
  // Every model of a full grid search on histogram inputs.
  PointSet x;
  std::vector<double> y;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 60; ++i) {
    const double t = u(rng);
    x.push_back(bump(t, 12));
    y.push_back(0.1 + 0.8 * t);
  }
  const SearchGrid grid = SearchGrid::defaults();
  std::size_t models = 0;
  std::size_t failed = 0;
  for (double gamma : grid.gammas) {
    for (double lambda : grid.lambdas) {
      try {
        const SvrModel m = svr_train(x, y, KernelSpec{KernelKind::wasserstein, gamma}, lambda,
                                     grid.epsilon_tube);
        const Eigen::MatrixXd k = gram_matrix(x, m.kernel);
        const Eigen::VectorXd theta = lambda * as_vec(m.alphas);
        worst_kkt = std::max(worst_kkt, svr_kkt_residual(k, as_vec(y), theta, lambda, grid.epsilon_tube));
        ++models;
      } catch (const TrainingError&) {
        ++failed;
      }
    }
  }
  return {worst_rel <= 1e-5 && worst_kkt <= 1e-6 && failed == 0,
          "max_rel_obj_err=" + fmt("%.3g", worst_rel) + " max_kkt=" + fmt("%.3g", worst_kkt) +
              " grid_models=" + std::to_string(models) + " failed=" + std::to_string(failed)};
}

Outcome ovk_correctness() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (std::size_t n : {2u, 5u, 10u, 17u, 25u}) {
    PointSet x, y;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = u(rng);
      x.push_back(bump(t, 12));
      y.push_back({0.2 + 0.6 * t, u(rng), 0.9 - 0.5 * t, u(rng)});
    }
    const double lambda = 1e-3;
    const OvkModel m = ovk_train(x, y, KernelSpec{KernelKind::wasserstein, 1.0},
                                 KernelSpec{KernelKind::gaussian_output, 0.5}, lambda, 1e-4);
    const auto nn = static_cast<Eigen::Index>(n);
    const Eigen::MatrixXd dense = oracle::kron(m.k_n, m.t_n) +
                                  static_cast<double>(n) * lambda * Eigen::MatrixXd::Identity(nn * nn, nn * nn);
    const Eigen::VectorXd expect =
        dense.partialPivLu().solve(oracle::vec(Eigen::MatrixXd::Identity(nn, nn)));
    worst = std::max(worst, (oracle::vec(m.u) - expect).norm() / expect.norm());
  }
  PointSet targets;
  for (int i = 0; i < 15; ++i) targets.push_back({u(rng), u(rng), u(rng), u(rng)});
  double pre = 0.0;
  for (double gamma : {0.01, 0.1, 1.0}) {
    for (std::size_t j = 0; j < targets.size(); ++j) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(15);
      v(static_cast<Eigen::Index>(j)) = 1.0;
      const PreimageResult r = solve_preimage(v, targets, gamma);
      for (std::size_t d = 0; d < 4; ++d) pre = std::max(pre, std::abs(r.y[d] - targets[j][d]));
    }
  }
  return {worst <= 1e-6 && pre <= 1e-3,
          "max_rel_err=" + fmt("%.3g", worst) + " preimage_err=" + fmt("%.3g", pre)};
}

Outcome ffnn_gradients() {
  double worst = 0.0;
  std::size_t checks = 0;
  for (const auto& hidden : default_architectures()) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      std::mt19937_64 rng(seed + 17);
      std::normal_distribution<double> nd(0.0, 1.0);
      FfnnModel m = FfnnModel::initialize(13, hidden, 4, seed);
      Eigen::VectorXd p(static_cast<Eigen::Index>(m.parameter_count()));
      for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = 0.5 * nd(rng);
      m.set_parameters(p);
      Eigen::MatrixXd x(13, 10), y(4, 10);
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
      for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = nd(rng);
      const Eigen::VectorXd g = ffnn_gradient(m, x, y).flatten();
      Eigen::VectorXd fd(p.size());
      FfnnModel probe = m;
      for (Eigen::Index k = 0; k < p.size(); ++k) {
        const double h = 1e-6;
        Eigen::VectorXd q = p;
        q(k) += h;
        probe.set_parameters(q);
        const double up = mse_loss(probe, x, y);
        q(k) = p(k) - h;
        probe.set_parameters(q);
        fd(k) = (up - mse_loss(probe, x, y)) / (2.0 * h);
      }
      worst = std::max(worst, (g - fd).norm() / fd.norm());
      ++checks;
    }
  }
  return {worst <= 1e-4, "max_rel_err=" + fmt("%.3g", worst) + " checks=" + std::to_string(checks)};
}

Outcome c_prediction() {
  SamplingPlan plan = SamplingPlan::single_parameter(100);
  plan.seed = 2024;
  FeatureSettings fs;
  GenerationOptions opt;
  opt.log = [](const std::string& s) { note(s); };
  const auto t0 = std::chrono::steady_clock::now();
  const GeneratedDataset gen = generate_dataset(plan, desk_sim(), fs, opt);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  note("generated " + std::to_string(gen.manifest.size()) + " patterns in " + fmt("%.0f", secs) + " s");
  const Dataset data = make_dataset(gen.manifest, gen.features, 8.0, gen.r_max.at(8.0), 12, 1);
  const std::vector<std::size_t> target{2};
  std::vector<double> runs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    runs.push_back(run_experiment(data, Method::svr, target, SearchGrid::defaults(), seed).test_nrmse);
  }
  const double mean = std::accumulate(runs.begin(), runs.end(), 0.0) / static_cast<double>(runs.size());
  std::string d = "records=" + std::to_string(data.records.size()) + " mean_test_nrmse=" + fmt("%.4f", mean) + " runs=";
  for (std::size_t i = 0; i < runs.size(); ++i) d += (i ? "," : "") + fmt("%.4f", runs[i]);
  return {mean <= 0.25 && data.records.size() >= 95, d};
}

struct Corpus {
  std::vector<double> c_of;  // per featurized pattern
  PointSet rdhs;
  std::size_t simulated = 0;
  double step = 0.0;
};

const Corpus& cluster_corpus() {
  static const Corpus corpus = [] {
    Corpus out;
    std::vector<double> cs;
    for (int k = 0; k < 6; ++k) cs.push_back(0.01 + (1.15 - 0.01) * k / 5.0);
    out.step = cs[1] - cs[0];
    const TorusGrid g(64);
    std::vector<PatternField> pats(60);
    parallel_for(60, 0, [&](std::size_t i) {
      SimConfig c = desk_sim();
      c.seed = 9000 + i;
      pats[i] = simulate(GmParams{0.02, 1.0, cs[i / 10], 100.0, 0.25}, g, c);
    });
    out.simulated = pats.size();
    FeatureSettings fs;
    const GeneratedDataset feats = featurize_patterns(pats, fs);
    for (const auto& row : feats.features) {
      out.c_of.push_back(cs[row.id / 10]);
      out.rdhs.push_back(row.bins);
    }
    return out;
  }();
  return corpus;
}

Outcome clustering() {
  const Corpus& corpus = cluster_corpus();
  const auto groups = cluster_patterns(corpus.rdhs, 0.05);
  std::size_t pure = 0;
  for (const auto& g : groups) {
    double lo = 1e300, hi = -1e300;
    for (std::size_t i : g) {
      lo = std::min(lo, corpus.c_of[i]);
      hi = std::max(hi, corpus.c_of[i]);
    }
    if (hi - lo <= corpus.step * (1.0 + 1e-9)) pure += g.size();
  }
  const double frac = static_cast<double>(pure) / static_cast<double>(corpus.simulated);
  return {frac >= 0.8, "pure_fraction=" + fmt("%.3f", frac) + " components=" +
                           std::to_string(groups.size()) + " largest=" +
                           std::to_string(groups.empty() ? 0 : groups[0].size()) + " featurized=" +
                           std::to_string(corpus.rdhs.size()) + "/" + std::to_string(corpus.simulated)};
}

Outcome embedding() {
  const Corpus& corpus = cluster_corpus();
  const Embedding e = embed_2d(corpus.rdhs);
  double intra = 0.0, inter = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < corpus.rdhs.size(); ++i) {
    for (std::size_t j = i + 1; j < corpus.rdhs.size(); ++j) {
      const double d = (e.coords.row(static_cast<Eigen::Index>(i)) - e.coords.row(static_cast<Eigen::Index>(j))).norm();
      if (corpus.c_of[i] == corpus.c_of[j]) {
        intra += d;
        ++n_intra;
      } else {
        inter += d;
        ++n_inter;
      }
    }
  }
  intra /= static_cast<double>(std::max<std::size_t>(n_intra, 1));
  inter /= static_cast<double>(std::max<std::size_t>(n_inter, 1));
  return {n_intra > 0 && n_inter > 0 && intra < inter,
          "mean_intra=" + fmt("%.4g", intra) + " mean_inter=" + fmt("%.4g", inter)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"spectral_solver", spectral_solver},
      {"turing_verdicts", turing_verdicts},
      {"simulation_dichotomy", simulation_dichotomy},
      {"resistance_oracle", resistance_oracle},
      {"rdh_invariance", rdh_invariance},
      {"wasserstein_oracle", wasserstein_oracle},
      {"svr_correctness", svr_correctness},
      {"ovk_correctness", ovk_correctness},
      {"ffnn_gradients", ffnn_gradients},
      {"c_prediction", c_prediction},
      {"clustering", clustering},
      {"embedding", embedding},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    bool selected = argc < 2;
    for (int i = 1; i < argc; ++i) selected = selected || name.find(argv[i]) != std::string::npos;
    if (!selected) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
