#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <numeric>
#include <random>
#include <set>

#include "oracles.hpp"
#include "turing/error.hpp"
#include "turing/pipeline.hpp"

using namespace turing;

namespace {

std::vector<double> delta_mass(std::size_t bins, std::size_t at) {
  std::vector<double> h(bins, 0.0);
  h[at] = 1.0;
  return h;
}

// Histogram of a discretized bump centred at t in [0, 1].
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

}  // namespace

TEST_CASE("parallel_for covers every index and rethrows") {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(100, 4, [&](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t i) {
                                 if (i == 7) throw DomainError("boom");
                               }),
                  DomainError);
  parallel_for(0, 2, [](std::size_t) { FAIL("called on empty range"); });
}

TEST_CASE("split sizes and determinism") {
  const Split s10 = split_dataset(10, 1);
  CHECK(s10.train.size() == 6);
  CHECK(s10.validation.size() == 2);
  CHECK(s10.test.size() == 2);
  const Split s5 = split_dataset(5, 1);
  CHECK(s5.train.size() == 3);
  CHECK(s5.validation.size() == 1);
  CHECK(s5.test.size() == 1);
  CHECK_THROWS_AS(split_dataset(4, 1), DomainError);

  for (std::size_t n : {7u, 13u, 100u}) {
    const Split s = split_dataset(n, 9);
    std::vector<std::size_t> all;
    for (const auto* part : {&s.train, &s.validation, &s.test}) all.insert(all.end(), part->begin(), part->end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(n);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(all == expect);
    const Split again = split_dataset(n, 9);
    CHECK(again.train == s.train);
    CHECK(again.test == s.test);
  }
  CHECK(split_dataset(100, 1).train != split_dataset(100, 2).train);
}

TEST_CASE("error metrics") {
  const PointSet t{{1.0}, {2.0}, {3.0}};
  CHECK(nrmse(t, t) == 0.0);
  const PointSet p{{1.5}, {2.5}, {3.5}};
  CHECK(rmse(p, t) == doctest::Approx(0.5));
  CHECK(nrmse(p, t) == doctest::Approx(0.25));
  const PointSet two{{1.0, 3.0}};
  const PointSet two_p{{2.0, 3.0}};
  CHECK(nrmse(two_p, two) == doctest::Approx(std::sqrt(0.5) / 2.0));
  CHECK_THROWS_AS(nrmse(PointSet{{0.0}}, PointSet{{0.0}}), DomainError);
  CHECK_THROWS_AS(nrmse(p, PointSet{{1.0}}), ShapeError);
}

TEST_CASE("normalizer round trip") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 7.0);
  PointSet y(50, std::vector<double>(4));
  for (auto& row : y) {
    for (double& v : row) v = u(rng);
  }
  const Normalizer n = Normalizer::fit(y);
  for (const auto& row : y) {
    const auto z = n.normalize(row);
    for (double v : z) CHECK(v <= 1.0);
    const auto back = n.denormalize(z);
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(back[j] - row[j]) <= 1e-12 * row[j]);
  }
  CHECK_THROWS_AS(Normalizer::fit(PointSet{{0.0}, {-1.0}}), DomainError);
}

TEST_CASE("targets and grids") {
  CHECK(target_indices("c") == std::vector<std::size_t>{2});
  CHECK(target_indices("all") == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(target_name(3) == "delta");
  CHECK_THROWS(target_indices("q"));
  CHECK(log2_grid(-1, 1) == std::vector<double>{0.5, 1.0, 2.0});
  CHECK(log10_grid(-2, 0).size() == 3);
  CHECK(log10_grid(-2, 0)[0] == doctest::Approx(0.01));
  CHECK(method_from_string(to_string(Method::ovk)) == Method::ovk);
}

TEST_CASE("clustering small examples") {
  const PointSet two{delta_mass(12, 1), delta_mass(12, 9)};
  // d_W^2 between the two masses is 64.
  CHECK(cluster_patterns(two, 4.0).size() == 2);
  CHECK(cluster_patterns(two, 64.0).size() == 1);
  const PointSet same(5, delta_mass(12, 3));
  CHECK(cluster_patterns(same, 0.0).size() == 1);

  PointSet mixed{delta_mass(12, 0), delta_mass(12, 1), delta_mass(12, 2), delta_mass(12, 8),
                 delta_mass(12, 9), delta_mass(12, 6)};
  const auto groups = cluster_patterns(mixed, 1.0);
  REQUIRE(groups.size() == 3);
  CHECK(groups[0] == std::vector<std::size_t>{0, 1, 2});
  CHECK(groups[1] == std::vector<std::size_t>{3, 4});
  CHECK(groups[2] == std::vector<std::size_t>{5});
  CHECK_THROWS_AS(cluster_patterns(mixed, -1.0), DomainError);
}

TEST_CASE("clustering is invariant under permutation") {
  std::mt19937_64 rng(5);
  PointSet h;
  for (int i = 0; i < 30; ++i) h.push_back(oracle::random_histogram(10, rng, 0.3));
  const double threshold = 1.5;
  const auto base = cluster_patterns(h, threshold);
  std::vector<std::size_t> perm(h.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  PointSet shuffled;
  for (std::size_t i : perm) shuffled.push_back(h[i]);
  auto as_sets = [](const std::vector<std::vector<std::size_t>>& groups,
                    const std::vector<std::size_t>& map) {
    std::set<std::set<std::size_t>> out;
    for (const auto& g : groups) {
      std::set<std::size_t> s;
      for (std::size_t i : g) s.insert(map[i]);
      out.insert(s);
    }
    return out;
  };
  std::vector<std::size_t> identity(h.size());
  std::iota(identity.begin(), identity.end(), 0);
  CHECK(as_sets(base, identity) == as_sets(cluster_patterns(shuffled, threshold), perm));

  // Every within-group pair chains through edges below the threshold; no edge crosses groups.
  std::vector<std::size_t> label(h.size());
  for (std::size_t g = 0; g < base.size(); ++g) {
    for (std::size_t i : base[g]) label[i] = g;
  }
  for (std::size_t i = 0; i < h.size(); ++i) {
    for (std::size_t j = i + 1; j < h.size(); ++j) {
      if (wasserstein_sq(h[i], h[j]) <= threshold) CHECK(label[i] == label[j]);
    }
  }
}

TEST_CASE("two-dimensional embedding") {
  const PointSet same(4, delta_mass(6, 2));
  const Embedding e1 = embed_2d(same);
  CHECK(e1.rank_deficient);
  for (Eigen::Index i = 1; i < 4; ++i) CHECK((e1.coords.row(i) - e1.coords.row(0)).norm() <= 1e-12);
  CHECK(e1.coords.col(1).isZero());

  std::mt19937_64 rng(7);
  PointSet h;
  for (int i = 0; i < 12; ++i) h.push_back(oracle::random_histogram(8, rng));
  const Embedding e = embed_2d(h);
  CHECK_FALSE(e.rank_deficient);
  Eigen::MatrixXd a(12, 8);
  for (int i = 0; i < 12; ++i) {
    for (int k = 0; k < 8; ++k) a(i, k) = h[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  }
  const Eigen::MatrixXd gram = a * a.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  const Eigen::VectorXd ev = es.eigenvalues().reverse();
  for (Eigen::Index k = 0; k < 2; ++k) {
    CHECK(e.singular_values(k) == doctest::Approx(std::sqrt(ev(k))).epsilon(1e-10));
    const Eigen::VectorXd c = e.coords.col(k);
    CHECK((gram * c - ev(k) * c).norm() <= 1e-10 * ev(k) * c.norm());
    CHECK(c.norm() == doctest::Approx(e.singular_values(k)).epsilon(1e-10));
  }
  CHECK(std::abs(e.coords.col(0).dot(e.coords.col(1))) <= 1e-10);
  CHECK_THROWS_AS(embed_2d(PointSet{delta_mass(3, 0)}), ShapeError);
}

TEST_CASE("grid search ties go to the smallest lambda and gamma") {
  PointSet x;
  PointSet y;
  for (int i = 0; i < 6; ++i) {
    x.push_back(bump(0.1 + 0.15 * i, 8));
    y.push_back({0.5});
  }
  const LearningData train{PointSet(x.begin(), x.begin() + 4), PointSet(y.begin(), y.begin() + 4)};
  const LearningData val{PointSet(x.begin() + 4, x.end()), PointSet(y.begin() + 4, y.end())};
  SearchGrid grid;
  grid.kernel = KernelKind::wasserstein;
  grid.gammas = {4.0, 1.0, 2.0};
  grid.lambdas = {0.1, 0.01};
  grid.epsilon_tube = 1.0;  // the tube swallows every target, so every model predicts 0
  const TrainedModel m = grid_search(train, val, Method::svr, grid, 2);
  REQUIRE(m.svr.size() == 1);
  CHECK(m.svr[0].lambda == 0.01);
  CHECK(m.svr[0].kernel.gamma == 1.0);
  CHECK(m.validation_nrmse == doctest::Approx(1.0));
}

TEST_CASE("grid search selects the best validation score") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto make = [&](int n) {
    LearningData d;
    for (int i = 0; i < n; ++i) {
      const double t = u(rng);
      d.x.push_back(bump(t, 12));
      d.y.push_back({0.2 + 0.6 * t});
    }
    return d;
  };
  const LearningData train = make(40);
  const LearningData val = make(15);
  const LearningData test = make(15);
  SearchGrid grid;
  grid.gammas = {0.01, 0.1, 1.0};
  grid.lambdas = {1e-4, 1e-2, 1.0};
  grid.epsilon_tube = 0.01;
  const TrainedModel m = grid_search(train, val, Method::svr, grid, 0);
  for (double g : grid.gammas) {
    for (double l : grid.lambdas) {
      std::vector<double> ty;
      for (const auto& r : train.y) ty.push_back(r[0]);
      const SvrModel direct = svr_train(train.x, ty, KernelSpec{grid.kernel, g}, l, grid.epsilon_tube);
      PointSet pred;
      for (const auto& x : val.x) pred.push_back({direct.predict(x)});
      CHECK(m.validation_nrmse <= nrmse(pred, val.y) + 1e-12);
    }
  }
  TrainedModel full = m;
  full.targets = {0};
  full.normalizer.maxima = {1.0};
  CHECK(nrmse(predict_all(full, test.x), test.y) < 0.1);
}

TEST_CASE("datasets join manifest and features") {
  std::vector<ManifestRow> manifest(3);
  for (std::size_t i = 0; i < 3; ++i) {
    manifest[i].id = i * 2;
    manifest[i].params = GmParams{0.02, 1.0, 0.1 * static_cast<double>(i + 1), 100.0, 0.25};
  }
  std::vector<FeatureRow> features;
  for (std::size_t i : {0u, 4u}) {
    features.push_back(FeatureRow{i, 8.0, delta_mass(3, 1), std::nullopt, std::nullopt});
    features.push_back(FeatureRow{i, 32.0, delta_mass(3, 2), std::nullopt, std::nullopt});
  }
  const Dataset d = make_dataset(manifest, features, 8.0, 1.5, 3, 1);
  REQUIRE(d.records.size() == 2);
  CHECK(d.records[1].id == 4);
  CHECK(d.records[1].params.c == doctest::Approx(0.3));
  CHECK(d.rdh.r_max == 1.5);
  CHECK_THROWS_AS(make_dataset(manifest, features, 8.0, 1.5, 4, 1), FormatError);
  features.push_back(FeatureRow{9, 8.0, delta_mass(3, 0), std::nullopt, std::nullopt});
  CHECK_THROWS_AS(make_dataset(manifest, features, 8.0, 1.5, 3, 1), FormatError);
}

TEST_CASE("dataset generation") {
  SimConfig sim = SimConfig::for_grid(12);
  sim.t_final = 100.0;
  sim.check_interval = 50.0;
  FeatureSettings fs;
  fs.radii = {3.0};
  fs.bins = 6;

  SamplingPlan none = SamplingPlan::single_parameter(0);
  none.grid_side = 12;
  const GeneratedDataset empty = generate_dataset(none, sim, fs);
  CHECK(empty.manifest.empty());
  CHECK(empty.features.empty());

  SamplingPlan plan = SamplingPlan::four_parameter(3);
  plan.grid_side = 12;
  plan.seed = 21;
  GenerationOptions opt;
  opt.jobs = 2;
  const GeneratedDataset a = generate_dataset(plan, sim, fs, opt);
  const GeneratedDataset b = generate_dataset(plan, sim, fs, opt);
  CHECK(a.manifest == b.manifest);
  CHECK(a.features == b.features);
  CHECK(a.draws == a.manifest.size() + a.failed_ids.size() + a.rejected);
  CHECK(a.rejected > 0);
  for (const auto& row : a.manifest) {
    CHECK(turing_check(row.params).turing);
    CHECK(row.params.s == 0.4);
  }
  for (const auto& f : a.features) {
    CHECK(f.bins.size() == 6);
    CHECK(std::accumulate(f.bins.begin(), f.bins.end(), 0.0) == doctest::Approx(1.0));
  }
  CHECK(a.features.size() + a.homogeneous_ids.size() == a.manifest.size());
}
