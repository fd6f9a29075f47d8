#include <doctest.h>

#include <numeric>
#include <random>

#include "oracles.hpp"
#include "turing/error.hpp"
#include "turing/features.hpp"

using namespace turing;

namespace {

std::vector<oracle::Edge> graph_edges(const PatternGraph& g) {
  std::vector<oracle::Edge> edges;
  for (NodeId v = 0; v < g.grid.nodes(); ++v) {
    edges.push_back({v, g.grid.right(v), g.right[v]});
    edges.push_back({v, g.grid.down(v), g.down[v]});
  }
  return edges;
}

PatternGraph random_graph(std::size_t side, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  PatternGraph g;
  g.grid = TorusGrid(side);
  g.right.resize(g.grid.nodes());
  g.down.resize(g.grid.nodes());
  for (auto& w : g.right) w = coin(rng) ? 1.0 : 0.003;
  for (auto& w : g.down) w = coin(rng) ? 1.0 : 0.003;
  return g;
}

std::vector<double> blob_field(const TorusGrid& g, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.05);
  std::vector<double> f(g.nodes());
  const double k = 2.0 * M_PI / static_cast<double>(g.side());
  for (NodeId v = 0; v < g.nodes(); ++v) {
    f[v] = 1.0 + std::sin(2.0 * k * g.row(v)) * std::cos(3.0 * k * g.col(v)) + n(rng);
  }
  return f;
}

}  // namespace

TEST_CASE("pattern graph weights") {
  const TorusGrid g(4);
  const auto constant = build_pattern_graph(g, std::vector<double>(16, 0.1));
  for (double w : constant.right) CHECK(w == 1.0);
  for (double w : constant.down) CHECK(w == 1.0);

  std::vector<double> checker(16);
  for (NodeId v = 0; v < 16; ++v) checker[v] = (g.row(v) + g.col(v)) % 2 ? 2.0 : 0.0;
  const auto cg = build_pattern_graph(g, checker, 0.003);
  for (double w : cg.right) CHECK(w == 0.003);
  for (double w : cg.down) CHECK(w == 0.003);

  std::vector<double> half(16);
  for (NodeId v = 0; v < 16; ++v) half[v] = g.col(v) < 2 ? 0.0 : 2.0;
  const auto hg = build_pattern_graph(g, half, 0.003);
  std::size_t low = 0;
  for (NodeId v = 0; v < 16; ++v) {
    const bool seam = g.col(v) == 1 || g.col(v) == 3;
    CHECK(hg.right[v] == (seam ? 0.003 : 1.0));
    CHECK(hg.down[v] == 1.0);
    low += hg.right[v] == 0.003;
  }
  CHECK(low == 8);
  CHECK(hg.edge_count() == 32);
  CHECK_THROWS_AS(build_pattern_graph(g, half, 0.0), DomainError);
}

TEST_CASE("two-node series resistance") {
  for (double w : {1.0, 0.003, 2.5}) {
    Eigen::MatrixXd l(2, 2);
    l << w, -w, -w, w;
    const ResistanceSolver s(l);
    CHECK(s.resistance(0, 1) == doctest::Approx(1.0 / w).epsilon(1e-13));
    CHECK(s.resistance(1, 0) == s.resistance(0, 1));
    CHECK(s.resistance(0, 0) == 0.0);
  }
}

TEST_CASE("resistance matches the pseudoinverse oracle") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t side = trial % 2 ? 4 : 3;
    const PatternGraph g = random_graph(side, rng);
    const auto edges = graph_edges(g);
    const std::size_t m = g.grid.nodes();
    const Eigen::MatrixXd lp = oracle::pseudoinverse_sym(oracle::weighted_laplacian(m, edges));
    const ResistanceSolver s(g);
    for (std::size_t v = 0; v < m; ++v) {
      const auto dist = oracle::dijkstra(m, edges, v);
      for (std::size_t w = 0; w < m; ++w) {
        const double r = s.resistance(v, w);
        CHECK(std::abs(r - oracle::pinv_resistance(lp, v, w)) <= 1e-8 * std::max(1.0, r));
        CHECK(r >= 0.0);
        CHECK(r <= dist[w] * (1.0 + 1e-12));
        CHECK(r == s.resistance(w, v));
      }
    }
    // Triangle inequality.
    for (std::size_t u = 0; u < m; ++u) {
      for (std::size_t v = 0; v < m; ++v) {
        for (std::size_t w = 0; w < m; ++w) {
          CHECK(s.resistance(u, w) <= s.resistance(u, v) + s.resistance(v, w) + 1e-10);
        }
      }
    }
  }
}

TEST_CASE("uniform torus resistance") {
  const PatternGraph g = build_pattern_graph(TorusGrid(3), std::vector<double>(9, 1.0));
  const Eigen::MatrixXd lp = oracle::pseudoinverse_sym(oracle::torus_laplacian(3));
  const ResistanceSolver s(g);
  for (std::size_t v = 0; v < 9; ++v) {
    for (std::size_t w = 0; w < 9; ++w) {
      CHECK(s.resistance(v, w) == doctest::Approx(oracle::pinv_resistance(lp, v, w)).epsilon(1e-10));
    }
  }
  const auto col = s.column(4);
  for (std::size_t w = 0; w < 9; ++w) CHECK(col[w] == s.resistance(4, w));
  CHECK_THROWS_AS(s.resistance(0, 9), IndexError);
}

TEST_CASE("disconnected graph is rejected") {
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(3, 3);
  l(0, 0) = l(1, 1) = 1.0;
  l(0, 1) = l(1, 0) = -1.0;
  CHECK_THROWS_AS(ResistanceSolver{l}, NumericalError);
}

TEST_CASE("resistance collection covers the toroidal disc") {
  const TorusGrid g(12);
  const ResistanceSolver s(build_pattern_graph(g, std::vector<double>(g.nodes(), 1.0)));
  std::size_t disc = 0;
  for (NodeId w = 0; w < g.nodes(); ++w) disc += toroidal_distance(g, 0, w) <= 3.0;
  const auto all = collect_resistances(s, g, 3.0, 1);
  CHECK(all.size() == disc * g.nodes());
  const auto sparse = collect_resistances(s, g, 3.0, 2);
  CHECK(sparse.size() == disc * 36);
  CHECK(std::count(all.begin(), all.end(), 0.0) == static_cast<std::ptrdiff_t>(g.nodes()));

  // Collected values carry single-precision significands and stay within rounding of the solver.
  std::mt19937_64 rng(29);
  const PatternGraph pg = build_pattern_graph(g, blob_field(g, rng));
  const ResistanceSolver rs(pg);
  const auto values = collect_resistances(rs, g, 12.0, 1);
  std::size_t k = 0;
  for (NodeId v = 0; v < g.nodes(); ++v) {
    for (NodeId off = 0; off < g.nodes(); ++off, ++k) {
      const NodeId w = g.node((g.row(v) + g.row(off)) % 12, (g.col(v) + g.col(off)) % 12);
      CHECK(values[k] == static_cast<double>(static_cast<float>(values[k])));
      CHECK(std::abs(values[k] - rs.resistance(v, w)) <= 0x1p-24 * rs.resistance(v, w));
    }
  }
}

TEST_CASE("histogram lies on the simplex") {
  const std::vector<double> r{0.1, 0.5, 0.9, 1.2, 5.0, 7.9, 8.0, 100.0};
  const Rdh h = histogram_rdh(r, RdhConfig{8.0, 1, 4, 8.0});
  CHECK(h.values.size() == 4);
  CHECK(std::accumulate(h.values.begin(), h.values.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(h.values[0] == doctest::Approx(4.0 / 6.0));
  CHECK(h.values[2] == doctest::Approx(1.0 / 6.0));
  CHECK(h.values[3] == doctest::Approx(1.0 / 6.0));
  CHECK_THROWS_AS(histogram_rdh(std::vector<double>{9.0}, RdhConfig{8.0, 1, 4, 8.0}),
                  DegenerateFeatureError);
  CHECK_THROWS_AS((RdhConfig{0.5, 1, 4, 8.0}.validate()), DomainError);
  CHECK_THROWS_AS((RdhConfig{8.0, 1, 4, 0.0}.validate()), DomainError);
}

TEST_CASE("quantile oracle and r_max") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  std::vector<double> copy = v;
  CHECK(empirical_quantile(copy, 0.99) == doctest::Approx(99.01));

  std::mt19937_64 rng(8);
  std::exponential_distribution<double> e(0.3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s(37 + trial * 13);
    for (double& x : s) x = e(rng);
    for (double p : {0.0, 0.25, 0.5, 0.99, 1.0}) {
      std::vector<double> c = s;
      CHECK(empirical_quantile(c, p) == doctest::Approx(oracle::quantile_sorted(s, p)).epsilon(1e-14));
    }
  }

  const std::vector<double> three(10, 3.0), five(10, 5.0);
  CHECK(r_max_from_dataset({three, five}) == 5.0);
  CHECK(r_max_from_dataset({v, v}) == doctest::Approx(99.01));
}

TEST_CASE("histogram invariances on a synthetic pattern") {
  std::mt19937_64 rng(13);
  const TorusGrid g(16);
  const auto f = blob_field(g, rng);
  const RdhConfig cfg{4.0, 1, 12, 6.0};
  const Rdh base = compute_rdh(build_pattern_graph(g, f), cfg);
  CHECK(std::accumulate(base.values.begin(), base.values.end(), 0.0) == doctest::Approx(1.0));

  const double mean = std::accumulate(f.begin(), f.end(), 0.0) / f.size();
  std::vector<double> shifted(f.size()), rotated(f.size()), plus(f.size()), scaled(f.size()),
      reflected(f.size());
  for (NodeId v = 0; v < g.nodes(); ++v) {
    const std::size_t r = g.row(v), c = g.col(v);
    shifted[g.node((r + 5) % 16, (c + 9) % 16)] = f[v];
    rotated[g.node(c, 15 - r)] = f[v];
    plus[v] = f[v] + 3.5;
    scaled[v] = 2.0 * f[v];
    reflected[v] = 2.0 * mean - f[v];
  }
  for (const auto* t : {&shifted, &rotated, &plus, &scaled, &reflected}) {
    CHECK(compute_rdh(build_pattern_graph(g, *t), cfg).values == base.values);
  }
}

TEST_CASE("maximal concentration") {
  CHECK(maximal_concentration(std::vector<double>(20, 3.0)) == 3.0);

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> jitter(-0.01, 0.01);
  std::vector<double> bimodal(400);
  for (std::size_t i = 0; i < bimodal.size(); ++i) bimodal[i] = (i % 2 ? 5.0 : 1.0) + jitter(rng);
  const double width = (5.02 - 0.98) / 25.0;
  CHECK(std::abs(maximal_concentration(bimodal) - 5.0) <= width);

  std::normal_distribution<double> n(2.0, 0.3);
  std::vector<double> uni(20000);
  for (double& x : uni) x = n(rng);
  const auto [lo, hi] = std::minmax_element(uni.begin(), uni.end());
  CHECK(std::abs(maximal_concentration(uni) - 2.0) <= 2.0 * (*hi - *lo) / 25.0);
}

TEST_CASE("connected components of high nodes") {
  const TorusGrid g(16);
  CHECK(connected_components_high(g, std::vector<double>(g.nodes(), 1.0)) == 1);

  std::vector<double> blobs(g.nodes(), 0.0);
  for (std::size_t r = 2; r < 5; ++r) {
    for (std::size_t c = 2; c < 5; ++c) blobs[g.node(r, c)] = 1.0;
  }
  for (std::size_t r = 9; r < 13; ++r) {
    for (std::size_t c = 8; c < 11; ++c) blobs[g.node(r, c)] = 1.0;
  }
  CHECK(connected_components_high(g, blobs) == 2);

  std::vector<double> checker(g.nodes());
  for (NodeId v = 0; v < g.nodes(); ++v) checker[v] = (g.row(v) + g.col(v)) % 2 ? 2.0 : 0.0;
  CHECK(connected_components_high(g, checker) == g.nodes() / 2);

  // Wrap-around joins blobs that touch across the seam.
  std::vector<double> seam(g.nodes(), 0.0);
  for (std::size_t r = 0; r < 16; ++r) {
    seam[g.node(r, 0)] = 1.0;
    seam[g.node(r, 15)] = 1.0;
  }
  CHECK(connected_components_high(g, seam) == 1);
}

TEST_CASE("homogeneous guard") {
  CHECK_THROWS_AS(require_nonhomogeneous(std::vector<double>(10, 1.0)), DegenerateFeatureError);
  CHECK_NOTHROW(require_nonhomogeneous(std::vector<double>{1.0, 2.0}));
}
