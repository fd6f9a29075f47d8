#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "turing/pipeline.hpp"

namespace turing {

/// Every tunable of an experiment. Text form: `[section]` headers followed by
/// `key = value` lines; `#` starts a comment.
struct RunConfig {
  std::uint64_t seed = 0;
  unsigned jobs = 0;
  SimConfig sim = SimConfig::for_grid(64);
  SamplingPlan sampling = SamplingPlan::single_parameter(100);
  FeatureSettings features;
  SearchGrid search = SearchGrid::defaults();

  std::string to_text() const;
  /// Keys of a [dataset] section are stored in `dataset` if given, else rejected.
  static RunConfig parse(const std::string& text,
                         std::map<std::string, std::string>* dataset = nullptr);
  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

std::string format_architectures(const std::vector<std::vector<std::size_t>>& archs);
std::vector<std::vector<std::size_t>> parse_architectures(const std::string& text);

/// Contents of a dataset directory: manifest.csv, features.csv, dataset.cfg, patterns/.
struct DatasetDir {
  RunConfig config;
  std::vector<ManifestRow> manifest;
  std::vector<FeatureRow> features;
  std::map<double, double> r_max;
};

void save_dataset_dir(const std::filesystem::path& dir, const GeneratedDataset& data,
                      const RunConfig& config);
DatasetDir read_dataset_dir(const std::filesystem::path& dir);
/// Records for one radius (the first configured radius by default).
Dataset load_dataset(const std::filesystem::path& dir, std::optional<double> radius = {});

}  // namespace turing
