#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "turing/features.hpp"
#include "turing/io.hpp"
#include "turing/kernel_regression.hpp"
#include "turing/kernels.hpp"
#include "turing/neural.hpp"
#include "turing/simulator.hpp"
#include "turing/stability.hpp"

namespace turing {

/// Runs body(i) for i in [0, count) on up to `jobs` threads (0: hardware concurrency).
/// The first exception thrown by any call is rethrown after all workers stop.
void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& body);

/// Closed interval; lo == hi fixes the parameter.
struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;

  bool fixed() const { return lo == hi; }
  friend bool operator==(const ParamRange&, const ParamRange&) = default;
};

struct SamplingPlan {
  /// Ranges for a, b, c, delta, s.
  std::array<ParamRange, 5> ranges{};
  std::size_t count = 0;
  std::size_t grid_side = 64;
  std::uint64_t seed = 0;

  void validate() const;
  GmParams draw(std::mt19937_64& rng) const;

  /// c on [0, 1.15] with a = 0.02, b = 1, delta = 100, s = 0.25.
  static SamplingPlan single_parameter(std::size_t count);
  /// a, b, c, delta varied, s = 0.4.
  static SamplingPlan four_parameter(std::size_t count);

  friend bool operator==(const SamplingPlan&, const SamplingPlan&) = default;
};

struct FeatureSettings {
  std::vector<double> radii{8.0};
  std::size_t spacing = 1;
  std::size_t bins = 12;
  double epsilon_weight = 0.003;
  std::size_t species_index = 0;
  bool extras = false;
  double homogeneous_threshold = 1e-3;

  void validate() const;
  friend bool operator==(const FeatureSettings&, const FeatureSettings&) = default;
};

struct GenerationOptions {
  unsigned jobs = 0;
  /// When set, pattern files are written to out_dir/patterns.
  std::filesystem::path out_dir;
  bool keep_patterns = false;
  std::function<void(const std::string&)> log;
};

struct GeneratedDataset {
  std::vector<ManifestRow> manifest;
  std::vector<FeatureRow> features;
  std::map<double, double> r_max;  ///< radius -> r_max
  std::vector<PatternField> patterns;  ///< parallel to manifest when keep_patterns
  std::size_t draws = 0;
  std::size_t rejected = 0;
  std::vector<std::size_t> failed_ids;
  std::vector<std::size_t> homogeneous_ids;
};

/// Per-pattern resistances for each radius, computed with one factorization.
std::vector<std::vector<double>> pattern_resistances(const PatternField& pattern,
                                                     const FeatureSettings& settings);

/// Rejection-samples parameters with a Turing instability, simulates them, fixes r_max
/// per radius from the whole set and computes the histograms.
GeneratedDataset generate_dataset(const SamplingPlan& plan, const SimConfig& sim,
                                  const FeatureSettings& settings,
                                  const GenerationOptions& options = {});

/// Histograms (and extras) for already simulated patterns; r_max is fixed from them.
GeneratedDataset featurize_patterns(const std::vector<PatternField>& patterns,
                                    const FeatureSettings& settings, unsigned jobs = 0);

struct Record {
  std::size_t id = 0;
  GmParams params;
  std::uint64_t seed = 0;
  bool converged = false;
  std::vector<double> rdh;
  std::optional<double> c_m;
  std::optional<std::size_t> n_c;
};

struct Dataset {
  std::vector<Record> records;
  RdhConfig rdh;
};

/// Joins manifest and feature rows of one radius; records without features are dropped.
Dataset make_dataset(const std::vector<ManifestRow>& manifest,
                     const std::vector<FeatureRow>& features, double radius, double r_max,
                     std::size_t bins, std::size_t spacing);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Random permutation, then round(0.6 n) training and round(0.2 n) validation indices.
Split split_dataset(std::size_t n, std::uint64_t seed);

/// "a", "b", "c", "delta", "s" or "all" (a, b, c, delta).
std::vector<std::size_t> target_indices(const std::string& target);
std::string target_name(std::size_t index);

struct Normalizer {
  std::vector<double> maxima;

  static Normalizer fit(const PointSet& targets);
  std::vector<double> normalize(std::span<const double> y) const;
  std::vector<double> denormalize(std::span<const double> y) const;
};

/// RMSE over all entries divided by the mean target.
double nrmse(const PointSet& predictions, const PointSet& targets);
double rmse(const PointSet& predictions, const PointSet& targets);

enum class Method { svr, ovk, ffnn };
std::string to_string(Method method);
Method method_from_string(const std::string& name);

struct SearchGrid {
  KernelKind kernel = KernelKind::wasserstein;
  std::vector<double> gammas;
  std::vector<double> lambdas;
  std::vector<double> gamma_outs;
  double epsilon_tube = 0.01;
  double eps_reg = 1e-4;
  std::vector<std::vector<std::size_t>> architectures;
  /// Zero step budget selects the schedule by training-set size.
  TrainSchedule schedule{0, 0};
  bool use_cm = false;

  static SearchGrid defaults();
  friend bool operator==(const SearchGrid&, const SearchGrid&) = default;
};

std::vector<double> log2_grid(int lo, int hi);
std::vector<double> log10_grid(int lo, int hi);

struct LearningData {
  PointSet x;
  PointSet y;  ///< normalized targets
};

LearningData learning_data(const Dataset& data, std::span<const std::size_t> indices,
                           std::span<const std::size_t> targets, const Normalizer& normalizer,
                           bool use_cm);

/// Input vector used by models: the histogram, optionally followed by c_m.
std::vector<double> model_input(std::span<const double> rdh, std::optional<double> c_m,
                                bool use_cm);

struct TrainedModel {
  Method method = Method::svr;
  std::vector<std::size_t> targets;
  Normalizer normalizer;
  bool use_cm = false;
  RdhConfig rdh;
  std::uint64_t split_seed = 0;
  double validation_nrmse = 0.0;
  std::vector<SvrModel> svr;  ///< one per target
  std::optional<OvkModel> ovk;
  std::optional<FfnnModel> ffnn;

  std::vector<double> predict_normalized(std::span<const double> x) const;
  std::vector<double> predict(std::span<const double> x) const;
  /// key=value lines describing the selected hyperparameters.
  std::vector<std::string> describe() const;
};

/// One model per grid point, scored by validation NRMSE. Ties go to the smallest lambda,
/// then the smallest gamma. Failed grid points are skipped.
TrainedModel grid_search(const LearningData& train, const LearningData& validation,
                         Method method, const SearchGrid& grid, unsigned jobs = 0);

PointSet predict_all(const TrainedModel& model, const PointSet& x);

struct ExperimentResult {
  TrainedModel model;
  Split split;
  double validation_nrmse = 0.0;
  double test_nrmse = 0.0;
};

/// Split, normalize over the dataset, grid-search on train/validation, score on test.
ExperimentResult run_experiment(const Dataset& data, Method method,
                                std::span<const std::size_t> targets, const SearchGrid& grid,
                                std::uint64_t split_seed, unsigned jobs = 0);

struct AveragedNrmse {
  double mean = 0.0;
  std::vector<double> runs;
};

/// Disjoint subsets of `subset_size` records from the shuffled pool, one experiment each,
/// mean test NRMSE. A single run is made for subset sizes above 500.
AveragedNrmse averaged_nrmse(const Dataset& pool, std::size_t subset_size, Method method,
                             std::span<const std::size_t> targets, const SearchGrid& grid,
                             std::uint64_t seed, unsigned jobs = 0);

/// Connected components of the graph joining histograms with d_W^2 <= threshold,
/// sorted by size (largest first, ties by smallest member).
std::vector<std::vector<std::size_t>> cluster_patterns(const PointSet& rdhs, double threshold);

struct Embedding {
  Eigen::MatrixXd coords;  ///< n x 2
  Eigen::VectorXd singular_values;
  bool rank_deficient = false;
};

/// Rank-2 truncated SVD of the (uncentered) histogram matrix; coordinates U_2 S_2.
Embedding embed_2d(const PointSet& rdhs);

}  // namespace turing
