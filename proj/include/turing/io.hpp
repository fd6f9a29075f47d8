#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "turing/simulator.hpp"

namespace turing {

/// Binary pattern layout: "TPAT", u32 version (1), u32 side, u32 species, five f64
/// parameters (a, b, c, delta, s), f64 elapsed time, u8 converged flag, then every
/// species field as little-endian f64 values in row-major order.
void write_pattern(std::ostream& out, const PatternField& pattern);
PatternField read_pattern(std::istream& in);
void save_pattern(const std::filesystem::path& path, const PatternField& pattern);
PatternField load_pattern(const std::filesystem::path& path);

struct ManifestRow {
  std::size_t id = 0;
  GmParams params;
  std::uint64_t seed = 0;
  bool converged = false;
  std::string path;

  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

void write_manifest(std::ostream& out, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(std::istream& in);

struct FeatureRow {
  std::size_t id = 0;
  double radius = 0.0;
  std::vector<double> bins;
  std::optional<double> c_m;
  std::optional<std::size_t> n_c;

  friend bool operator==(const FeatureRow&, const FeatureRow&) = default;
};

/// Header id,radius,bin_1..bin_B,c_m,n_c; extras are left blank when absent.
void write_features(std::ostream& out, const std::vector<FeatureRow>& rows);
std::vector<FeatureRow> read_features(std::istream& in);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);
double parse_double(const std::string& text);

std::vector<std::string> split(const std::string& text, char sep);
std::string trim(const std::string& text);

}  // namespace turing
