#include "turing/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "turing/error.hpp"

namespace turing {

namespace {

double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

Eigen::MatrixXd to_columns(const PointSet& points) {
  if (points.empty()) return {};
  const auto d = static_cast<Eigen::Index>(points.front().size());
  Eigen::MatrixXd m(d, static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (static_cast<Eigen::Index>(points[i].size()) != d) throw ShapeError("points differ in dimension");
    m.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXd>(points[i].data(), d);
  }
  return m;
}

void log_line(const GenerationOptions& options, const std::string& msg) {
  if (options.log) options.log(msg);
}

}  // namespace

void parallel_for(std::size_t count, unsigned jobs,
                  const std::function<void(std::size_t)>& body) {
  if (count == 0) return;
  unsigned threads = jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : jobs;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const auto worker = [&] {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) break;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        stop.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

void SamplingPlan::validate() const {
  for (const auto& r : ranges) {
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
      throw DomainError("sampling ranges must be finite with lower <= upper");
    }
  }
  if (grid_side < 2) throw DomainError("grid side must be at least 2");
}

GmParams SamplingPlan::draw(std::mt19937_64& rng) const {
  std::array<double, 5> v{};
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& r = ranges[i];
    v[i] = r.fixed() ? r.lo : r.lo + (r.hi - r.lo) * uniform_unit(rng);
  }
  return GmParams::from_array(v);
}

SamplingPlan SamplingPlan::single_parameter(std::size_t count) {
  SamplingPlan plan;
  plan.ranges = {ParamRange{0.02, 0.02}, ParamRange{1.0, 1.0}, ParamRange{0.0, 1.15},
                 ParamRange{100.0, 100.0}, ParamRange{0.25, 0.25}};
  plan.count = count;
  return plan;
}

SamplingPlan SamplingPlan::four_parameter(std::size_t count) {
  SamplingPlan plan;
  plan.ranges = {ParamRange{0.01, 0.7}, ParamRange{0.4, 2.0}, ParamRange{0.02, 7.0},
                 ParamRange{20.0, 200.0}, ParamRange{0.4, 0.4}};
  plan.count = count;
  return plan;
}

void FeatureSettings::validate() const {
  if (radii.empty()) throw DomainError("at least one histogram radius is required");
  for (double r : radii) RdhConfig{r, spacing, bins, 1.0}.validate();
  if (!(epsilon_weight > 0.0)) throw DomainError("edge weight epsilon must be positive");
  if (!(homogeneous_threshold >= 0.0)) throw DomainError("homogeneity threshold must be non-negative");
}

std::vector<std::vector<double>> pattern_resistances(const PatternField& pattern,
                                                     const FeatureSettings& settings) {
  const PatternGraph graph =
      build_pattern_graph(pattern, settings.species_index, settings.epsilon_weight);
  const ResistanceSolver solver(graph);
  std::vector<std::vector<double>> out;
  out.reserve(settings.radii.size());
  for (double r : settings.radii) {
    out.push_back(collect_resistances(solver, pattern.grid, r, settings.spacing));
  }
  return out;
}

GeneratedDataset featurize_patterns(const std::vector<PatternField>& patterns,
                                    const FeatureSettings& settings, unsigned jobs) {
  settings.validate();
  GeneratedDataset out;
  const std::size_t n = patterns.size();
  const std::size_t n_radii = settings.radii.size();

  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < n; ++i) {
    const double cv = coefficient_of_variation(patterns[i].field(settings.species_index));
    if (cv >= settings.homogeneous_threshold) {
      usable.push_back(i);
    } else {
      out.homogeneous_ids.push_back(i);
    }
  }

  // First pass: per-pattern quantiles fix r_max; second pass bins with it.
  std::vector<std::vector<double>> quantiles(usable.size());
  parallel_for(usable.size(), jobs, [&](std::size_t k) {
    auto values = pattern_resistances(patterns[usable[k]], settings);
    quantiles[k].resize(n_radii);
    for (std::size_t r = 0; r < n_radii; ++r) {
      quantiles[k][r] = empirical_quantile(values[r], 0.99);
    }
  });
  if (usable.empty()) return out;
  std::vector<double> r_max(n_radii, 0.0);
  for (const auto& q : quantiles) {
    for (std::size_t r = 0; r < n_radii; ++r) r_max[r] = std::max(r_max[r], q[r]);
  }
  for (std::size_t r = 0; r < n_radii; ++r) out.r_max[settings.radii[r]] = r_max[r];

  std::vector<FeatureRow> rows(usable.size() * n_radii);
  parallel_for(usable.size(), jobs, [&](std::size_t k) {
    const PatternField& p = patterns[usable[k]];
    const auto values = pattern_resistances(p, settings);
    std::optional<ExtraFeatures> extras;
    if (settings.extras) extras = extra_features(p, settings.species_index);
    for (std::size_t r = 0; r < n_radii; ++r) {
      const RdhConfig cfg{settings.radii[r], settings.spacing, settings.bins, r_max[r]};
      FeatureRow& row = rows[k * n_radii + r];
      row.id = usable[k];
      row.radius = settings.radii[r];
      row.bins = histogram_rdh(values[r], cfg).values;
      if (extras) {
        row.c_m = extras->c_m;
        row.n_c = extras->n_c;
      }
    }
  });
  out.features = std::move(rows);
  return out;
}

GeneratedDataset generate_dataset(const SamplingPlan& plan, const SimConfig& sim,
                                  const FeatureSettings& settings,
                                  const GenerationOptions& options) {
  plan.validate();
  sim.validate();
  settings.validate();

  struct Job {
    GmParams params;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  std::mt19937_64 rng(plan.seed);
  std::size_t draws = 0;
  std::size_t rejected = 0;
  const std::size_t cap = 50 * plan.count;
  while (jobs.size() < plan.count && draws < cap) {
    const GmParams p = plan.draw(rng);
    ++draws;
    bool turing = false;
    try {
      turing = turing_check(p).turing;
    } catch (const Error&) {
      turing = false;
    }
    if (turing) {
      jobs.push_back({p, rng()});
    } else {
      ++rejected;
    }
  }
  if (jobs.size() < plan.count) {
    log_line(options, "warning: only " + std::to_string(jobs.size()) + " of " +
                          std::to_string(plan.count) + " draws had a Turing instability");
  }

  const TorusGrid grid(plan.grid_side);
  std::vector<std::optional<PatternField>> sims(jobs.size());
  parallel_for(jobs.size(), options.jobs, [&](std::size_t i) {
    SimConfig cfg = sim;
    cfg.seed = jobs[i].seed;
    try {
      sims[i] = simulate(jobs[i].params, grid, cfg);
    } catch (const SimulationFailure& e) {
      log_line(options, "record " + std::to_string(i) + " skipped: " + e.what());
    }
  });

  GeneratedDataset out;
  out.draws = draws;
  out.rejected = rejected;
  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir / "patterns");

  std::vector<PatternField> done;
  std::vector<std::size_t> done_ids;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!sims[i]) {
      out.failed_ids.push_back(i);
      continue;
    }
    ManifestRow row;
    row.id = i;
    row.params = jobs[i].params;
    row.seed = jobs[i].seed;
    row.converged = sims[i]->converged;
    char name[32];
    std::snprintf(name, sizeof(name), "pattern_%06zu.tpat", i);
    row.path = std::string("patterns/") + name;
    if (!options.out_dir.empty()) save_pattern(options.out_dir / row.path, *sims[i]);
    out.manifest.push_back(row);
    done.push_back(std::move(*sims[i]));
    done_ids.push_back(i);
  }

  GeneratedDataset feats = featurize_patterns(done, settings, options.jobs);
  for (auto& row : feats.features) row.id = done_ids[row.id];
  for (std::size_t k : feats.homogeneous_ids) {
    out.homogeneous_ids.push_back(done_ids[k]);
    log_line(options, "record " + std::to_string(done_ids[k]) + " is homogeneous; no features");
  }
  out.features = std::move(feats.features);
  out.r_max = std::move(feats.r_max);
  if (options.keep_patterns) out.patterns = std::move(done);
  return out;
}

Dataset make_dataset(const std::vector<ManifestRow>& manifest,
                     const std::vector<FeatureRow>& features, double radius, double r_max,
                     std::size_t bins, std::size_t spacing) {
  std::map<std::size_t, const ManifestRow*> by_id;
  for (const auto& row : manifest) by_id[row.id] = &row;
  Dataset data;
  data.rdh = RdhConfig{radius, spacing, bins, r_max};
  for (const auto& f : features) {
    if (f.radius != radius) continue;
    const auto it = by_id.find(f.id);
    if (it == by_id.end()) throw FormatError("feature row " + std::to_string(f.id) + " has no manifest entry");
    if (f.bins.size() != bins) throw FormatError("feature row has " + std::to_string(f.bins.size()) + " bins, expected " + std::to_string(bins));
    Record r;
    r.id = f.id;
    r.params = it->second->params;
    r.seed = it->second->seed;
    r.converged = it->second->converged;
    r.rdh = f.bins;
    r.c_m = f.c_m;
    r.n_c = f.n_c;
    data.records.push_back(std::move(r));
  }
  return data;
}

Split split_dataset(std::size_t n, std::uint64_t seed) {
  if (n < 5) throw DomainError("splitting needs at least 5 records, got " + std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = std::min(i, static_cast<std::size_t>(uniform_unit(rng) * static_cast<double>(i + 1)));
    std::swap(perm[i], perm[j]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(0.6 * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n)));
  Split s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                      perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  return s;
}

std::vector<std::size_t> target_indices(const std::string& target) {
  if (target == "all") return {0, 1, 2, 3};
  for (std::size_t i = 0; i < 5; ++i) {
    if (target_name(i) == target) return {i};
  }
  throw FormatError("unknown target '" + target + "' (expected a, b, c, delta, s or all)");
}

std::string target_name(std::size_t index) {
  static const std::array<const char*, 5> names{"a", "b", "c", "delta", "s"};
  if (index >= names.size()) throw IndexError("target index out of range");
  return names[index];
}

Normalizer Normalizer::fit(const PointSet& targets) {
  if (targets.empty()) throw ShapeError("cannot normalize an empty target set");
  Normalizer n;
  n.maxima.assign(targets.front().size(), -std::numeric_limits<double>::infinity());
  for (const auto& y : targets) {
    if (y.size() != n.maxima.size()) throw ShapeError("targets differ in dimension");
    for (std::size_t j = 0; j < y.size(); ++j) n.maxima[j] = std::max(n.maxima[j], y[j]);
  }
  for (double m : n.maxima) {
    if (!(m > 0.0)) throw DomainError("target maxima must be positive for normalization");
  }
  return n;
}

std::vector<double> Normalizer::normalize(std::span<const double> y) const {
  if (y.size() != maxima.size()) throw ShapeError("target has wrong dimension");
  std::vector<double> out(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) out[j] = y[j] / maxima[j];
  return out;
}

std::vector<double> Normalizer::denormalize(std::span<const double> y) const {
  if (y.size() != maxima.size()) throw ShapeError("target has wrong dimension");
  std::vector<double> out(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) out[j] = y[j] * maxima[j];
  return out;
}

namespace {

std::pair<double, double> squared_error_and_total(const PointSet& predictions,
                                                  const PointSet& targets, std::size_t& count) {
  if (predictions.size() != targets.size() || targets.empty()) {
    throw ShapeError("predictions and targets differ in count or are empty");
  }
  double sq = 0.0;
  double total = 0.0;
  count = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (predictions[i].size() != targets[i].size()) throw ShapeError("prediction has wrong dimension");
    for (std::size_t j = 0; j < targets[i].size(); ++j) {
      const double d = predictions[i][j] - targets[i][j];
      sq += d * d;
      total += targets[i][j];
      ++count;
    }
  }
  if (count == 0) throw ShapeError("empty targets");
  return {sq, total};
}

}  // namespace

double rmse(const PointSet& predictions, const PointSet& targets) {
  std::size_t count = 0;
  const auto [sq, total] = squared_error_and_total(predictions, targets, count);
  return std::sqrt(sq / static_cast<double>(count));
}

double nrmse(const PointSet& predictions, const PointSet& targets) {
  std::size_t count = 0;
  const auto [sq, total] = squared_error_and_total(predictions, targets, count);
  const double mean = total / static_cast<double>(count);
  if (!(mean > 0.0)) throw DomainError("NRMSE needs a positive target mean");
  return std::sqrt(sq / static_cast<double>(count)) / mean;
}

std::string to_string(Method method) {
  switch (method) {
    case Method::svr: return "svr";
    case Method::ovk: return "ovk";
    case Method::ffnn: return "ffnn";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  for (auto m : {Method::svr, Method::ovk, Method::ffnn}) {
    if (to_string(m) == name) return m;
  }
  throw FormatError("unknown method '" + name + "' (expected svr, ovk or ffnn)");
}

std::vector<double> log2_grid(int lo, int hi) {
  std::vector<double> g;
  for (int e = lo; e <= hi; ++e) g.push_back(std::ldexp(1.0, e));
  return g;
}

std::vector<double> log10_grid(int lo, int hi) {
  std::vector<double> g;
  for (int e = lo; e <= hi; ++e) g.push_back(std::pow(10.0, e));
  return g;
}

SearchGrid SearchGrid::defaults() {
  SearchGrid g;
  g.gammas = log2_grid(-6, 6);
  g.lambdas = log10_grid(-6, 1);
  g.gamma_outs = log2_grid(-6, 6);
  g.architectures = default_architectures();
  return g;
}

std::vector<double> model_input(std::span<const double> rdh, std::optional<double> c_m,
                                bool use_cm) {
  std::vector<double> x(rdh.begin(), rdh.end());
  if (use_cm) {
    if (!c_m) throw FormatError("model expects the maximal concentration feature, which is missing");
    x.push_back(*c_m);
  }
  return x;
}

LearningData learning_data(const Dataset& data, std::span<const std::size_t> indices,
                           std::span<const std::size_t> targets, const Normalizer& normalizer,
                           bool use_cm) {
  LearningData out;
  for (std::size_t i : indices) {
    if (i >= data.records.size()) throw IndexError("record index out of range");
    const Record& r = data.records[i];
    out.x.push_back(model_input(r.rdh, r.c_m, use_cm));
    const auto p = r.params.as_array();
    std::vector<double> y;
    for (std::size_t t : targets) y.push_back(p.at(t));
    out.y.push_back(normalizer.normalize(y));
  }
  return out;
}

std::vector<double> TrainedModel::predict_normalized(std::span<const double> x) const {
  switch (method) {
    case Method::svr: {
      std::vector<double> y;
      for (const auto& m : svr) y.push_back(m.predict(x));
      return y;
    }
    case Method::ovk:
      if (!ovk) throw Error("model has no operator-valued kernel payload");
      return ovk->predict(x);
    case Method::ffnn:
      if (!ffnn) throw Error("model has no network payload");
      return ffnn->forward(x);
  }
  throw Error("unknown method");
}

std::vector<double> TrainedModel::predict(std::span<const double> x) const {
  return normalizer.denormalize(predict_normalized(x));
}

std::vector<std::string> TrainedModel::describe() const {
  std::vector<std::string> lines;
  lines.push_back("method=" + to_string(method));
  std::string names;
  for (std::size_t t : targets) names += (names.empty() ? "" : ",") + target_name(t);
  lines.push_back("targets=" + names);
  switch (method) {
    case Method::svr:
      for (std::size_t k = 0; k < svr.size(); ++k) {
        const std::string suffix = svr.size() > 1 ? "_" + target_name(targets[k]) : "";
        lines.push_back("kernel" + suffix + "=" + to_string(svr[k].kernel.kind));
        lines.push_back("gamma" + suffix + "=" + format_double(svr[k].kernel.gamma));
        lines.push_back("lambda" + suffix + "=" + format_double(svr[k].lambda));
      }
      break;
    case Method::ovk:
      if (ovk) {
        lines.push_back("kernel=" + to_string(ovk->input_kernel.kind));
        lines.push_back("gamma=" + format_double(ovk->input_kernel.gamma));
        lines.push_back("gamma_out=" + format_double(ovk->output_kernel.gamma));
        lines.push_back("lambda=" + format_double(ovk->lambda));
      }
      break;
    case Method::ffnn:
      if (ffnn) {
        std::string arch = "(";
        for (std::size_t k = 0; k < ffnn->hidden.size(); ++k) {
          arch += (k ? "," : "") + std::to_string(ffnn->hidden[k]);
        }
        lines.push_back("architecture=" + arch + ")");
      }
      break;
  }
  lines.push_back("validation_nrmse=" + format_double(validation_nrmse));
  return lines;
}

PointSet predict_all(const TrainedModel& model, const PointSet& x) {
  PointSet out;
  out.reserve(x.size());
  for (const auto& xi : x) out.push_back(model.predict_normalized(xi));
  return out;
}

namespace {

PointSet column_of(const PointSet& y, std::size_t j) {
  PointSet out;
  out.reserve(y.size());
  for (const auto& row : y) out.push_back({row.at(j)});
  return out;
}

double score(const PointSet& predictions, const PointSet& targets) {
  try {
    const double v = nrmse(predictions, targets);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

template <typename Model>
struct Candidate {
  std::optional<Model> model;
  double score = std::numeric_limits<double>::infinity();
};

// Candidates are listed in tie-break order; the first strictly smaller score wins.
template <typename Model>
std::size_t pick(const std::vector<Candidate<Model>>& candidates) {
  std::size_t best = candidates.size();
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].model && candidates[i].score < best_score) {
      best = i;
      best_score = candidates[i].score;
    }
  }
  if (best == candidates.size()) throw TrainingError("every grid point failed to train", best_score);
  return best;
}

std::vector<double> gammas_for(const SearchGrid& grid) {
  if (grid.kernel == KernelKind::chi2_symmetric) return {1.0};
  if (grid.gammas.empty()) throw DomainError("gamma grid is empty");
  std::vector<double> g = grid.gammas;
  std::sort(g.begin(), g.end());
  return g;
}

std::vector<double> sorted(std::vector<double> v, const char* what) {
  if (v.empty()) throw DomainError(std::string(what) + " grid is empty");
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TrainedModel grid_search(const LearningData& train, const LearningData& validation,
                         Method method, const SearchGrid& grid, unsigned jobs) {
  if (train.x.empty() || validation.x.empty()) throw ShapeError("training and validation sets must be nonempty");
  if (train.x.size() != train.y.size() || validation.x.size() != validation.y.size()) {
    throw ShapeError("inputs and targets differ in count");
  }
  const std::size_t d = train.y.front().size();
  TrainedModel result;
  result.method = method;

  if (method == Method::svr) {
    const auto gammas = gammas_for(grid);
    const auto lambdas = sorted(grid.lambdas, "lambda");
    PointSet val_pred(validation.x.size(), std::vector<double>(d));
    for (std::size_t j = 0; j < d; ++j) {
      std::vector<double> y;
      for (const auto& row : train.y) y.push_back(row[j]);
      const PointSet val_y = column_of(validation.y, j);
      std::vector<Candidate<SvrModel>> cands(lambdas.size() * gammas.size());
      parallel_for(cands.size(), jobs, [&](std::size_t k) {
        const double lambda = lambdas[k / gammas.size()];
        const KernelSpec spec{grid.kernel, gammas[k % gammas.size()]};
        try {
          SvrModel m = svr_train(train.x, y, spec, lambda, grid.epsilon_tube);
          PointSet pred;
          for (const auto& x : validation.x) pred.push_back({m.predict(x)});
          cands[k].score = score(pred, val_y);
          cands[k].model = std::move(m);
        } catch (const TrainingError&) {
        }
      });
      SvrModel best = *cands[pick(cands)].model;
      for (std::size_t i = 0; i < validation.x.size(); ++i) val_pred[i][j] = best.predict(validation.x[i]);
      result.svr.push_back(std::move(best));
    }
    result.validation_nrmse = score(val_pred, validation.y);
    return result;
  }

  if (method == Method::ovk) {
    const auto gammas = gammas_for(grid);
    const auto lambdas = sorted(grid.lambdas, "lambda");
    const auto gouts = sorted(grid.gamma_outs, "output gamma");
    const std::size_t per_lambda = gammas.size() * gouts.size();
    std::vector<Candidate<OvkModel>> cands(lambdas.size() * per_lambda);
    parallel_for(cands.size(), jobs, [&](std::size_t k) {
      const double lambda = lambdas[k / per_lambda];
      const KernelSpec in{grid.kernel, gammas[(k % per_lambda) / gouts.size()]};
      const KernelSpec out{KernelKind::gaussian_output, gouts[k % gouts.size()]};
      try {
        OvkModel m = ovk_train(train.x, train.y, in, out, lambda, grid.eps_reg);
        PointSet pred;
        for (const auto& x : validation.x) pred.push_back(m.predict(x));
        cands[k].score = score(pred, validation.y);
        cands[k].model = std::move(m);
      } catch (const TrainingError&) {
      }
    });
    const std::size_t best = pick(cands);
    result.ovk = std::move(*cands[best].model);
    result.validation_nrmse = cands[best].score;
    return result;
  }

  const Eigen::MatrixXd xt = to_columns(train.x);
  const Eigen::MatrixXd yt = to_columns(train.y);
  const Eigen::MatrixXd xv = to_columns(validation.x);
  const Eigen::MatrixXd yv = to_columns(validation.y);
  TrainSchedule schedule = grid.schedule;
  if (schedule.max_steps <= 0) {
    const TrainSchedule sized = TrainSchedule::for_dataset_size(train.x.size() + validation.x.size());
    schedule.max_steps = sized.max_steps;
    schedule.patience = sized.patience;
  }
  if (grid.architectures.empty()) throw DomainError("architecture list is empty");
  std::vector<Candidate<FfnnModel>> cands(grid.architectures.size());
  parallel_for(cands.size(), jobs, [&](std::size_t k) {
    try {
      FfnnModel m = ffnn_train(xt, yt, xv, yv, grid.architectures[k], schedule);
      const Eigen::MatrixXd out = m.forward(xv);
      PointSet pred(validation.x.size());
      for (Eigen::Index i = 0; i < out.cols(); ++i) {
        pred[static_cast<std::size_t>(i)].assign(out.col(i).data(), out.col(i).data() + out.rows());
      }
      cands[k].score = score(pred, validation.y);
      cands[k].model = std::move(m);
    } catch (const TrainingError&) {
    }
  });
  const std::size_t best = pick(cands);
  result.ffnn = std::move(*cands[best].model);
  result.validation_nrmse = cands[best].score;
  return result;
}

ExperimentResult run_experiment(const Dataset& data, Method method,
                                std::span<const std::size_t> targets, const SearchGrid& grid,
                                std::uint64_t split_seed, unsigned jobs) {
  if (targets.empty()) throw DomainError("no targets selected");
  PointSet all_targets;
  for (const auto& r : data.records) {
    const auto p = r.params.as_array();
    std::vector<double> y;
    for (std::size_t t : targets) y.push_back(p.at(t));
    all_targets.push_back(std::move(y));
  }
  ExperimentResult res;
  res.split = split_dataset(data.records.size(), split_seed);
  const Normalizer norm = Normalizer::fit(all_targets);
  const bool use_cm = grid.use_cm && method == Method::ffnn;
  const LearningData train = learning_data(data, res.split.train, targets, norm, use_cm);
  const LearningData val = learning_data(data, res.split.validation, targets, norm, use_cm);
  const LearningData test = learning_data(data, res.split.test, targets, norm, use_cm);

  res.model = grid_search(train, val, method, grid, jobs);
  res.model.targets.assign(targets.begin(), targets.end());
  res.model.normalizer = norm;
  res.model.use_cm = use_cm;
  res.model.rdh = data.rdh;
  res.model.split_seed = split_seed;
  res.validation_nrmse = res.model.validation_nrmse;
  res.test_nrmse = nrmse(predict_all(res.model, test.x), test.y);
  return res;
}

AveragedNrmse averaged_nrmse(const Dataset& pool, std::size_t subset_size, Method method,
                             std::span<const std::size_t> targets, const SearchGrid& grid,
                             std::uint64_t seed, unsigned jobs) {
  const std::size_t n = pool.records.size();
  if (subset_size < 5 || subset_size > n) {
    throw DomainError("subset size " + std::to_string(subset_size) + " does not fit a pool of " +
                      std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = std::min(i, static_cast<std::size_t>(uniform_unit(rng) * static_cast<double>(i + 1)));
    std::swap(order[i], order[j]);
  }
  const std::size_t runs = subset_size > 500 ? 1 : n / subset_size;
  AveragedNrmse out;
  for (std::size_t k = 0; k < runs; ++k) {
    Dataset subset;
    subset.rdh = pool.rdh;
    for (std::size_t i = 0; i < subset_size; ++i) {
      subset.records.push_back(pool.records[order[k * subset_size + i]]);
    }
    const auto res = run_experiment(subset, method, targets, grid, seed + k + 1, jobs);
    out.runs.push_back(res.test_nrmse);
  }
  out.mean = std::accumulate(out.runs.begin(), out.runs.end(), 0.0) /
             static_cast<double>(out.runs.size());
  return out;
}

std::vector<std::vector<std::size_t>> cluster_patterns(const PointSet& rdhs, double threshold) {
  if (!(threshold >= 0.0)) throw DomainError("cluster threshold must be non-negative");
  const std::size_t n = rdhs.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](std::size_t v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (wasserstein_sq(rdhs[i], rdhs[j]) <= threshold) {
        const std::size_t a = find(i);
        const std::size_t b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& x, const auto& y) { return x.size() > y.size(); });
  return out;
}

Embedding embed_2d(const PointSet& rdhs) {
  if (rdhs.size() < 2) throw ShapeError("embedding needs at least two histograms");
  const Eigen::MatrixXd a = to_columns(rdhs).transpose();
  Embedding e;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU);
  e.singular_values = svd.singularValues();
  e.coords = Eigen::MatrixXd::Zero(a.rows(), 2);
  const Eigen::Index rank = std::min<Eigen::Index>(2, e.singular_values.size());
  const double s0 = rank > 0 ? e.singular_values(0) : 0.0;
  for (Eigen::Index k = 0; k < rank; ++k) {
    const double s = e.singular_values(k);
    if (!(s > 1e-12 * s0) || s == 0.0) {
      e.rank_deficient = true;
      continue;
    }
    Eigen::VectorXd u = svd.matrixU().col(k);
    Eigen::Index pivot = 0;
    u.cwiseAbs().maxCoeff(&pivot);
    if (u(pivot) < 0.0) u = -u;
    e.coords.col(k) = u * s;
  }
  if (rank < 2) e.rank_deficient = true;
  return e;
}

}  // namespace turing
