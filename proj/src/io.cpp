#include "turing/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "binary_io.hpp"
#include "turing/error.hpp"

namespace turing {

namespace {

using detail::get_le;
using detail::put_le;

constexpr std::array<char, 4> kPatternMagic{'T', 'P', 'A', 'T'};
constexpr std::uint32_t kPatternVersion = 1;

std::size_t parse_size(const std::string& text, const char* what) {
  std::size_t value = 0;
  const std::string t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw FormatError(std::string("invalid ") + what + " '" + text + "'");
  }
  return value;
}

std::uint64_t parse_u64(const std::string& text, const char* what) {
  std::uint64_t value = 0;
  const std::string t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw FormatError(std::string("invalid ") + what + " '" + text + "'");
  }
  return value;
}

}  // namespace

std::string format_double(double x) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  if (ec != std::errc()) throw FormatError("cannot format number");
  return {buf.data(), ptr};
}

double parse_double(const std::string& text) {
  const std::string t = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw FormatError("invalid number '" + text + "'");
  }
  return value;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string current;
  for (char ch : text) {
    if (ch == sep) {
      parts.push_back(current);
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  parts.push_back(current);
  return parts;
}

std::string trim(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

void write_pattern(std::ostream& out, const PatternField& pattern) {
  const std::size_t m = pattern.grid.nodes();
  for (const auto& f : pattern.species) {
    if (f.size() != m) throw ShapeError("species field does not match the grid");
  }
  out.write(kPatternMagic.data(), kPatternMagic.size());
  put_le<std::uint32_t>(out, kPatternVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(pattern.grid.side()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(pattern.species.size()));
  for (double v : pattern.params.as_array()) put_le<double>(out, v);
  put_le<double>(out, pattern.elapsed_time);
  put_le<std::uint8_t>(out, pattern.converged ? 1 : 0);
  for (const auto& f : pattern.species) {
    for (double v : f) put_le<double>(out, v);
  }
  if (!out) throw FormatError("failed to write pattern");
}

PatternField read_pattern(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kPatternMagic) throw FormatError("not a pattern file (bad magic)");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kPatternVersion) {
    throw FormatError("unsupported pattern file version " + std::to_string(version));
  }
  const auto side = get_le<std::uint32_t>(in);
  const auto species = get_le<std::uint32_t>(in);
  if (side == 0 || species == 0 || side > 65536 || species > 1024) {
    throw FormatError("pattern header has implausible dimensions");
  }
  std::array<double, 5> p{};
  for (double& v : p) v = get_le<double>(in);

  PatternField pattern;
  pattern.grid = TorusGrid(side);
  pattern.params = GmParams::from_array(p);
  pattern.elapsed_time = get_le<double>(in);
  const auto flag = get_le<std::uint8_t>(in);
  if (flag > 1) throw FormatError("pattern converged flag must be 0 or 1");
  pattern.converged = flag == 1;
  pattern.species.assign(species, std::vector<double>(pattern.grid.nodes()));
  for (auto& f : pattern.species) {
    for (double& v : f) v = get_le<double>(in);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after pattern data");
  return pattern;
}

void save_pattern(const std::filesystem::path& path, const PatternField& pattern) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  write_pattern(out, pattern);
}

PatternField load_pattern(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open pattern file '" + path.string() + "'");
  return read_pattern(in);
}

void write_manifest(std::ostream& out, const std::vector<ManifestRow>& rows) {
  out << "id,a,b,c,delta,s,seed,converged,path\n";
  for (const auto& r : rows) {
    if (r.path.find_first_of(",\n") != std::string::npos) {
      throw FormatError("manifest paths must not contain commas or newlines");
    }
    out << r.id;
    for (double v : r.params.as_array()) out << ',' << format_double(v);
    out << ',' << r.seed << ',' << (r.converged ? 1 : 0) << ',' << r.path << '\n';
  }
}

std::vector<ManifestRow> read_manifest(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "id,a,b,c,delta,s,seed,converged,path") {
    throw FormatError("manifest header must be id,a,b,c,delta,s,seed,converged,path");
  }
  std::vector<ManifestRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 9) {
      throw FormatError("manifest line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " fields, expected 9");
    }
    ManifestRow r;
    r.id = parse_size(cells[0], "id");
    std::array<double, 5> p{};
    for (std::size_t i = 0; i < 5; ++i) p[i] = parse_double(cells[i + 1]);
    r.params = GmParams::from_array(p);
    r.seed = parse_u64(cells[6], "seed");
    const std::size_t flag = parse_size(cells[7], "converged flag");
    if (flag > 1) throw FormatError("converged flag must be 0 or 1");
    r.converged = flag == 1;
    r.path = trim(cells[8]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_features(std::ostream& out, const std::vector<FeatureRow>& rows) {
  const std::size_t bins = rows.empty() ? 0 : rows.front().bins.size();
  out << "id,radius";
  for (std::size_t b = 1; b <= bins; ++b) out << ",bin_" << b;
  out << ",c_m,n_c\n";
  for (const auto& r : rows) {
    if (r.bins.size() != bins) throw ShapeError("feature rows differ in bin count");
    out << r.id << ',' << format_double(r.radius);
    for (double v : r.bins) out << ',' << format_double(v);
    out << ',' << (r.c_m ? format_double(*r.c_m) : std::string());
    out << ',' << (r.n_c ? std::to_string(*r.n_c) : std::string()) << '\n';
  }
}

std::vector<FeatureRow> read_features(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("feature file is empty");
  const auto header = split(trim(line), ',');
  if (header.size() < 4 || header[0] != "id" || header[1] != "radius" ||
      header[header.size() - 2] != "c_m" || header.back() != "n_c") {
    throw FormatError("feature header must be id,radius,bin_1..bin_B,c_m,n_c");
  }
  const std::size_t bins = header.size() - 4;
  for (std::size_t b = 0; b < bins; ++b) {
    if (header[b + 2] != "bin_" + std::to_string(b + 1)) throw FormatError("unexpected feature column '" + header[b + 2] + "'");
  }
  std::vector<FeatureRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw FormatError("feature line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " fields, expected " +
                        std::to_string(header.size()));
    }
    FeatureRow r;
    r.id = parse_size(cells[0], "id");
    r.radius = parse_double(cells[1]);
    r.bins.resize(bins);
    for (std::size_t b = 0; b < bins; ++b) r.bins[b] = parse_double(cells[b + 2]);
    if (!trim(cells[bins + 2]).empty()) r.c_m = parse_double(cells[bins + 2]);
    if (!trim(cells[bins + 3]).empty()) r.n_c = parse_size(cells[bins + 3], "n_c");
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace turing
