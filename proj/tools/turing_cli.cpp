// turing: simulate Gierer-Meinhardt patterns, extract resistance distance
// histograms and train parameter predictors.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "turing/config.hpp"
#include "turing/error.hpp"
#include "turing/features.hpp"
#include "turing/io.hpp"
#include "turing/model_file.hpp"
#include "turing/pipeline.hpp"
#include "turing/simulator.hpp"
#include "turing/stability.hpp"

namespace fs = std::filesystem;
using namespace turing;

namespace {

GmParams parse_params(const std::string& text) {
  const auto cells = split(text, ',');
  if (cells.size() != 5) throw FormatError("--params expects a,b,c,delta,s");
  std::vector<double> v;
  for (const auto& c : cells) v.push_back(parse_double(c));
  GmParams p = GmParams::from_array(v);
  p.validate();
  return p;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  return out;
}

void print(const std::string& key, const std::string& value) {
  std::cout << key << '=' << value << '\n';
}
void print(const std::string& key, double value) { print(key, format_double(value)); }
void print_size(const std::string& key, std::size_t value) { print(key, std::to_string(value)); }

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ",") + format_double(x);
  return s;
}

struct SimulateArgs {
  std::string params;
  std::size_t grid = 64;
  std::uint64_t seed = 0;
  std::optional<double> t_final;
  std::string out;
};

void run_simulate(const SimulateArgs& a) {
  const GmParams p = parse_params(a.params);
  SimConfig cfg = SimConfig::for_grid(a.grid);
  cfg.seed = a.seed;
  if (a.t_final) cfg.t_final = *a.t_final;
  const PatternField f = simulate(p, TorusGrid(a.grid), cfg);
  save_pattern(a.out, f);
  print("converged", f.converged ? "true" : "false");
  print("elapsed_time", f.elapsed_time);
  print("cv", coefficient_of_variation(f.field(0)));
}

struct StabilityArgs {
  std::string params;
  std::string dispersion_out;
};

void run_stability(const StabilityArgs& a) {
  const GmParams p = parse_params(a.params);
  const StabilityReport r = turing_check(p);
  print("u_star", join(r.equilibrium));
  print("ode_stable", r.ode_stable ? "true" : "false");
  print("turing", r.turing ? "true" : "false");
  print("q2_star", r.q2_star);
  print("max_growth", r.max_growth);
  if (!a.dispersion_out.empty()) {
    auto out = open_out(a.dispersion_out);
    out << "q2,growth\n";
    for (const auto& [q2, g] : dispersion_curve(gierer_meinhardt_model(p), r.equilibrium)) {
      out << format_double(q2) << ',' << format_double(g) << '\n';
    }
  }
}

struct GenerateArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
};

void run_generate(const GenerateArgs& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : RunConfig::load(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.jobs) cfg.jobs = *a.jobs;
  SamplingPlan plan = cfg.sampling;
  plan.seed = cfg.seed;
  SimConfig sim = cfg.sim;
  GenerationOptions opt;
  opt.jobs = cfg.jobs;
  opt.out_dir = a.out;
  opt.log = [](const std::string& msg) { std::cerr << msg << '\n'; };
  fs::create_directories(fs::path(a.out) / "patterns");
  const GeneratedDataset d = generate_dataset(plan, sim, cfg.features, opt);
  save_dataset_dir(a.out, d, cfg);
  print_size("records", d.features.size() / cfg.features.radii.size());
  print_size("draws", d.draws);
  print_size("rejected", d.rejected);
  print_size("failed", d.failed_ids.size());
  print_size("homogeneous", d.homogeneous_ids.size());
  for (const auto& [radius, value] : d.r_max) print("r_max_" + format_double(radius), value);
}

struct FeaturesArgs {
  std::string pattern;
  double radius = 8.0;
  std::size_t bins = 12;
  std::size_t spacing = 1;
  double r_max = 0.0;
  double epsilon = 0.003;
  bool extras = false;
  std::string out;
};

void run_features(const FeaturesArgs& a) {
  const PatternField f = load_pattern(a.pattern);
  require_nonhomogeneous(f.field(0));
  RdhConfig cfg{a.radius, a.spacing, a.bins, a.r_max};
  cfg.validate();
  const Rdh rdh = compute_rdh(build_pattern_graph(f, 0, a.epsilon), cfg);
  FeatureRow row{0, a.radius, rdh.values, {}, {}};
  if (a.extras) {
    const ExtraFeatures e = extra_features(f);
    row.c_m = e.c_m;
    row.n_c = e.n_c;
  }
  if (a.out.empty()) {
    write_features(std::cout, {row});
  } else {
    auto out = open_out(a.out);
    write_features(out, {row});
    print("rdh", join(rdh.values));
    if (row.c_m) print("c_m", *row.c_m);
    if (row.n_c) print_size("n_c", *row.n_c);
  }
}

struct ResistanceMapArgs {
  std::string pattern;
  std::string node;
  double epsilon = 0.003;
  std::string out;
};

void run_resistance_map(const ResistanceMapArgs& a) {
  const PatternField f = load_pattern(a.pattern);
  const auto cells = split(a.node, ',');
  if (cells.size() != 2) throw FormatError("--node expects i,j");
  const auto i = static_cast<std::size_t>(parse_double(cells[0]));
  const auto j = static_cast<std::size_t>(parse_double(cells[1]));
  const std::size_t v = f.grid.node(i, j);
  const ResistanceSolver solver(build_pattern_graph(f, 0, a.epsilon));
  auto out = open_out(a.out);
  out << "row,col,concentration,resistance\n";
  const auto u = f.field(0);
  for (std::size_t w = 0; w < f.grid.nodes(); ++w) {
    out << f.grid.row(w) << ',' << f.grid.col(w) << ',' << format_double(u[w]) << ','
        << format_double(solver.resistance(v, w)) << '\n';
  }
  print_size("nodes", f.grid.nodes());
}

struct TrainArgs {
  std::string method;
  std::string dataset;
  std::string target = "c";
  std::string out;
  std::optional<double> radius;
  std::uint64_t seed = 0;
  unsigned jobs = 0;
};

void run_train(const TrainArgs& a) {
  const DatasetDir dir = read_dataset_dir(a.dataset);
  const Dataset data = load_dataset(a.dataset, a.radius);
  const Method method = method_from_string(a.method);
  const auto targets = target_indices(a.target);
  const ExperimentResult r = run_experiment(data, method, targets, dir.config.search, a.seed, a.jobs);
  save_model(a.out, r.model);
  for (const auto& line : r.model.describe()) std::cout << line << '\n';
  print_size("train", r.split.train.size());
  print_size("validation", r.split.validation.size());
  print_size("test", r.split.test.size());
  print("test_nrmse", r.test_nrmse);
}

struct PredictArgs {
  std::string model;
  std::string pattern;
};

void run_predict(const PredictArgs& a) {
  const TrainedModel model = load_model(a.model);
  const PatternField f = load_pattern(a.pattern);
  require_nonhomogeneous(f.field(0));
  const Rdh rdh = compute_rdh(build_pattern_graph(f), model.rdh);
  std::optional<double> c_m;
  if (model.use_cm) c_m = maximal_concentration(f);
  const auto y = model.predict(model_input(rdh.values, c_m, model.use_cm));
  for (std::size_t k = 0; k < y.size(); ++k) print(target_name(model.targets[k]), y[k]);
}

struct EvaluateArgs {
  std::string model;
  std::string dataset;
  std::string split = "test";
  std::string out;
};

void run_evaluate(const EvaluateArgs& a) {
  const TrainedModel model = load_model(a.model);
  const Dataset data = load_dataset(a.dataset, model.rdh.radius);
  if (data.rdh.bins != model.rdh.bins || data.rdh.r_max != model.rdh.r_max) {
    throw FormatError("dataset features do not match the model's histogram settings");
  }
  const Split s = split_dataset(data.records.size(), model.split_seed);
  std::vector<std::size_t> idx;
  if (a.split == "test") idx = s.test;
  else if (a.split == "validation") idx = s.validation;
  else if (a.split == "train") idx = s.train;
  else if (a.split == "all") {
    for (std::size_t i = 0; i < data.records.size(); ++i) idx.push_back(i);
  } else {
    throw FormatError("--split must be train, validation, test or all");
  }
  const LearningData ld = learning_data(data, idx, model.targets, model.normalizer, model.use_cm);
  const PointSet pred = predict_all(model, ld.x);
  print_size("records", idx.size());
  print("nrmse", nrmse(pred, ld.y));
  print("rmse", rmse(pred, ld.y));
  if (a.out.empty()) return;
  auto out = open_out(a.out);
  out << "id";
  for (std::size_t t : model.targets) {
    const std::string n = target_name(t);
    out << ',' << n << "_true," << n << "_pred," << n << "_error";
  }
  out << '\n';
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto truth = model.normalizer.denormalize(ld.y[k]);
    const auto est = model.normalizer.denormalize(pred[k]);
    out << data.records[idx[k]].id;
    for (std::size_t t = 0; t < truth.size(); ++t) {
      out << ',' << format_double(truth[t]) << ',' << format_double(est[t]) << ','
          << format_double(est[t] - truth[t]);
    }
    out << '\n';
  }
}

struct ClusterArgs {
  std::string dataset;
  double threshold = 0.05;
  std::optional<double> radius;
  std::string out;
};

void run_cluster(const ClusterArgs& a) {
  const Dataset data = load_dataset(a.dataset, a.radius);
  PointSet rdhs;
  for (const auto& r : data.records) rdhs.push_back(r.rdh);
  const auto comps = cluster_patterns(rdhs, a.threshold);
  print_size("components", comps.size());
  print_size("largest", comps.empty() ? 0 : comps.front().size());
  auto out = open_out(a.out);
  out << "id,component,a,b,c,delta,s\n";
  for (std::size_t k = 0; k < comps.size(); ++k) {
    for (std::size_t i : comps[k]) {
      const Record& r = data.records[i];
      out << r.id << ',' << k;
      for (double v : r.params.as_array()) out << ',' << format_double(v);
      out << '\n';
    }
  }
}

struct EmbedArgs {
  std::string dataset;
  std::optional<double> radius;
  std::string out;
};

void run_embed(const EmbedArgs& a) {
  const Dataset data = load_dataset(a.dataset, a.radius);
  PointSet rdhs;
  for (const auto& r : data.records) rdhs.push_back(r.rdh);
  const Embedding e = embed_2d(rdhs);
  if (e.rank_deficient) std::cerr << "warning: histogram matrix has rank < 2\n";
  print("sigma_1", e.singular_values.size() > 0 ? e.singular_values(0) : 0.0);
  print("sigma_2", e.singular_values.size() > 1 ? e.singular_values(1) : 0.0);
  auto out = open_out(a.out);
  out << "id,x,y,a,b,c,delta,s\n";
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const Record& r = data.records[i];
    out << r.id << ',' << format_double(e.coords(i, 0)) << ',' << format_double(e.coords(i, 1));
    for (double v : r.params.as_array()) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Turing pattern simulation and parameter inference"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Simulate one pattern");
  c_sim->add_option("--params", sim.params, "a,b,c,delta,s")->required();
  c_sim->add_option("--grid", sim.grid, "Grid side")->check(CLI::PositiveNumber);
  c_sim->add_option("--seed", sim.seed, "Noise seed");
  c_sim->add_option("--t-final", sim.t_final, "Model time limit");
  c_sim->add_option("--out", sim.out, "Pattern file")->required();

  StabilityArgs stab;
  auto* c_stab = app.add_subcommand("stability", "Linear stability analysis");
  c_stab->add_option("--params", stab.params, "a,b,c,delta,s")->required();
  c_stab->add_option("--dispersion-out", stab.dispersion_out, "CSV of the dispersion relation");

  GenerateArgs gen;
  auto* c_data = app.add_subcommand("dataset", "Dataset operations");
  c_data->require_subcommand(1);
  auto* c_gen = c_data->add_subcommand("generate", "Sample, simulate and featurize");
  c_gen->add_option("--config", gen.config, "Run configuration");
  c_gen->add_option("--out", gen.out, "Output directory")->required();
  c_gen->add_option("--seed", gen.seed, "Master seed");
  c_gen->add_option("--jobs", gen.jobs, "Worker threads");

  FeaturesArgs feat;
  auto* c_feat = app.add_subcommand("features", "Resistance distance histogram of a pattern");
  c_feat->add_option("--pattern", feat.pattern, "Pattern file");
  c_feat->add_option("--radius", feat.radius, "Toroidal radius");
  c_feat->add_option("--bins", feat.bins, "Histogram bins");
  c_feat->add_option("--spacing", feat.spacing, "Node spacing");
  c_feat->add_option("--rmax", feat.r_max, "Histogram upper bound");
  c_feat->add_option("--epsilon", feat.epsilon, "Weight of low edges");
  c_feat->add_flag("--extras", feat.extras, "Append c_m and n_c");
  c_feat->add_option("--out", feat.out, "Feature CSV");

  ResistanceMapArgs rmap;
  auto* c_rmap = c_feat->add_subcommand("resistance-map", "Resistances from one node");
  c_rmap->add_option("--pattern", rmap.pattern, "Pattern file")->required();
  c_rmap->add_option("--node", rmap.node, "i,j")->required();
  c_rmap->add_option("--epsilon", rmap.epsilon, "Weight of low edges");
  c_rmap->add_option("--out", rmap.out, "CSV file")->required();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Grid search and train a predictor");
  c_train->add_option("--method", train.method, "svr, ovk or ffnn")->required();
  c_train->add_option("--dataset", train.dataset, "Dataset directory")->required();
  c_train->add_option("--target", train.target, "a, b, c, delta, s or all");
  c_train->add_option("--radius", train.radius, "Feature radius");
  c_train->add_option("--out", train.out, "Model file")->required();
  c_train->add_option("--seed", train.seed, "Split seed");
  c_train->add_option("--jobs", train.jobs, "Worker threads");

  PredictArgs pred;
  auto* c_pred = app.add_subcommand("predict", "Estimate parameters of a pattern");
  c_pred->add_option("--model", pred.model, "Model file")->required();
  c_pred->add_option("--pattern", pred.pattern, "Pattern file")->required();

  EvaluateArgs eval;
  auto* c_eval = app.add_subcommand("evaluate", "Score a model on a dataset split");
  c_eval->add_option("--model", eval.model, "Model file")->required();
  c_eval->add_option("--dataset", eval.dataset, "Dataset directory")->required();
  c_eval->add_option("--split", eval.split, "train, validation, test or all");
  c_eval->add_option("--out", eval.out, "Per-record CSV");

  ClusterArgs clus;
  auto* c_clus = app.add_subcommand("cluster", "Components of the histogram neighbourhood graph");
  c_clus->add_option("--dataset", clus.dataset, "Dataset directory")->required();
  c_clus->add_option("--threshold", clus.threshold, "Squared Wasserstein threshold");
  c_clus->add_option("--radius", clus.radius, "Feature radius");
  c_clus->add_option("--out", clus.out, "Membership CSV")->required();

  EmbedArgs emb;
  auto* c_emb = app.add_subcommand("embed", "Rank-2 SVD coordinates of the histograms");
  c_emb->add_option("--dataset", emb.dataset, "Dataset directory")->required();
  c_emb->add_option("--radius", emb.radius, "Feature radius");
  c_emb->add_option("--out", emb.out, "Coordinates CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*c_sim) run_simulate(sim);
    else if (*c_stab) run_stability(stab);
    else if (*c_gen) run_generate(gen);
    else if (*c_rmap) run_resistance_map(rmap);
    else if (*c_feat) {
      if (feat.pattern.empty()) throw FormatError("features requires --pattern");
      run_features(feat);
    }
    else if (*c_train) run_train(train);
    else if (*c_pred) run_predict(pred);
    else if (*c_eval) run_evaluate(eval);
    else if (*c_clus) run_cluster(clus);
    else if (*c_emb) run_embed(emb);
  } catch (const DegenerateFeatureError& e) {
    std::cerr << "error: degenerate pattern: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
