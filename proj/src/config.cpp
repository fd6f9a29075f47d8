#include "turing/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "turing/error.hpp"

namespace turing {

namespace {

struct Field {
  const char* section;
  const char* key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  for (const auto& part : split(text, ',')) out.push_back(parse_double(part));
  return out;
}

std::uint64_t parse_unsigned(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos) {
    throw FormatError("expected a non-negative integer, got '" + text + "'");
  }
  try {
    return std::stoull(t);
  } catch (const std::exception&) {
    throw FormatError("integer out of range: '" + text + "'");
  }
}

long parse_long(const std::string& text) {
  const std::string t = trim(text);
  const std::size_t start = !t.empty() && t[0] == '-' ? 1 : 0;
  if (t.size() == start || t.find_first_not_of("0123456789", start) != std::string::npos) {
    throw FormatError("expected an integer, got '" + text + "'");
  }
  return std::stol(t);
}

bool parse_bool(const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw FormatError("expected true or false, got '" + text + "'");
}

std::string format_bool(bool b) { return b ? "true" : "false"; }

std::string format_range(const ParamRange& r) {
  return r.fixed() ? format_double(r.lo) : format_double(r.lo) + "," + format_double(r.hi);
}

ParamRange parse_range(const std::string& text) {
  const auto v = parse_doubles(text);
  if (v.size() == 1) return {v[0], v[0]};
  if (v.size() == 2) return {v[0], v[1]};
  throw FormatError("expected a value or 'lo,hi', got '" + text + "'");
}

std::vector<Field> fields(RunConfig& c) {
  auto dbl = [](const char* section, const char* key, double& ref) {
    return Field{section, key, [&ref] { return format_double(ref); },
                 [&ref](const std::string& v) { ref = parse_double(v); }};
  };
  auto uns = [](const char* section, const char* key, auto& ref) {
    using T = std::remove_reference_t<decltype(ref)>;
    return Field{section, key, [&ref] { return std::to_string(ref); },
                 [&ref](const std::string& v) { ref = static_cast<T>(parse_unsigned(v)); }};
  };
  auto lng = [](const char* section, const char* key, auto& ref) {
    using T = std::remove_reference_t<decltype(ref)>;
    return Field{section, key, [&ref] { return std::to_string(ref); },
                 [&ref](const std::string& v) { ref = static_cast<T>(parse_long(v)); }};
  };
  auto flag = [](const char* section, const char* key, bool& ref) {
    return Field{section, key, [&ref] { return format_bool(ref); },
                 [&ref](const std::string& v) { ref = parse_bool(v); }};
  };
  auto list = [](const char* section, const char* key, std::vector<double>& ref) {
    return Field{section, key, [&ref] { return join_doubles(ref); },
                 [&ref](const std::string& v) { ref = parse_doubles(v); }};
  };
  auto range = [](const char* key, ParamRange& ref) {
    return Field{"sampling", key, [&ref] { return format_range(ref); },
                 [&ref](const std::string& v) { ref = parse_range(v); }};
  };

  std::vector<Field> f;
  f.push_back(uns("run", "seed", c.seed));
  f.push_back(uns("run", "jobs", c.jobs));

  f.push_back(dbl("simulation", "h", c.sim.h));
  f.push_back(dbl("simulation", "eps_inner", c.sim.eps_inner));
  f.push_back(dbl("simulation", "eps_outer", c.sim.eps_outer));
  f.push_back(dbl("simulation", "t_final", c.sim.t_final));
  f.push_back(dbl("simulation", "check_interval", c.sim.check_interval));
  f.push_back(dbl("simulation", "noise_amplitude", c.sim.noise_amplitude));
  f.push_back(uns("simulation", "seed", c.sim.seed));
  f.push_back(lng("simulation", "max_inner_iters", c.sim.max_inner_iters));
  f.push_back(lng("simulation", "max_halvings", c.sim.max_halvings));

  f.push_back(range("a", c.sampling.ranges[0]));
  f.push_back(range("b", c.sampling.ranges[1]));
  f.push_back(range("c", c.sampling.ranges[2]));
  f.push_back(range("delta", c.sampling.ranges[3]));
  f.push_back(range("s", c.sampling.ranges[4]));
  f.push_back(uns("sampling", "count", c.sampling.count));
  f.push_back(uns("sampling", "grid", c.sampling.grid_side));

  f.push_back(list("features", "radii", c.features.radii));
  f.push_back(uns("features", "spacing", c.features.spacing));
  f.push_back(uns("features", "bins", c.features.bins));
  f.push_back(dbl("features", "epsilon_weight", c.features.epsilon_weight));
  f.push_back(uns("features", "species", c.features.species_index));
  f.push_back(flag("features", "extras", c.features.extras));
  f.push_back(dbl("features", "homogeneous_threshold", c.features.homogeneous_threshold));

  auto& s = c.search;
  f.push_back(Field{"learning", "kernel", [&s] { return to_string(s.kernel); },
                    [&s](const std::string& v) { s.kernel = kernel_kind_from_string(trim(v)); }});
  f.push_back(list("learning", "gammas", s.gammas));
  f.push_back(list("learning", "lambdas", s.lambdas));
  f.push_back(list("learning", "gamma_outs", s.gamma_outs));
  f.push_back(dbl("learning", "epsilon_tube", s.epsilon_tube));
  f.push_back(dbl("learning", "eps_reg", s.eps_reg));
  f.push_back(Field{"learning", "architectures", [&s] { return format_architectures(s.architectures); },
                    [&s](const std::string& v) { s.architectures = parse_architectures(v); }});
  f.push_back(flag("learning", "use_cm", s.use_cm));
  f.push_back(lng("learning", "max_steps", s.schedule.max_steps));
  f.push_back(lng("learning", "patience", s.schedule.patience));
  f.push_back(uns("learning", "batch_size", s.schedule.batch_size));
  f.push_back(dbl("learning", "learning_rate", s.schedule.learning_rate));
  f.push_back(uns("learning", "train_seed", s.schedule.seed));
  return f;
}

}  // namespace

std::string format_architectures(const std::vector<std::vector<std::size_t>>& archs) {
  std::string out;
  for (std::size_t i = 0; i < archs.size(); ++i) {
    out += i ? ";(" : "(";
    for (std::size_t k = 0; k < archs[i].size(); ++k) {
      out += (k ? "," : "") + std::to_string(archs[i][k]);
    }
    out += ")";
  }
  return out;
}

std::vector<std::vector<std::size_t>> parse_architectures(const std::string& text) {
  std::vector<std::vector<std::size_t>> out;
  if (trim(text).empty()) return out;
  for (const auto& part : split(text, ';')) {
    const std::string t = trim(part);
    if (t.size() < 2 || t.front() != '(' || t.back() != ')') {
      throw FormatError("architecture must look like (w1,w2,...), got '" + part + "'");
    }
    std::vector<std::size_t> widths;
    const std::string inner = trim(t.substr(1, t.size() - 2));
    if (!inner.empty()) {
      for (const auto& w : split(inner, ',')) {
        const auto v = parse_unsigned(w);
        if (v == 0) throw FormatError("layer width must be positive");
        widths.push_back(static_cast<std::size_t>(v));
      }
    }
    out.push_back(std::move(widths));
  }
  return out;
}

std::string RunConfig::to_text() const {
  RunConfig copy = *this;
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields(copy)) {
    if (section != f.section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get() << '\n';
  }
  return out.str();
}

RunConfig RunConfig::parse(const std::string& text, std::map<std::string, std::string>* dataset) {
  RunConfig c;
  auto table = fields(c);
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (t.front() == '[') {
      if (t.back() != ']') throw FormatError(where + "unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw FormatError(where + "expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (section == "dataset" && dataset) {
      (*dataset)[key] = value;
      continue;
    }
    bool found = false;
    for (auto& f : table) {
      if (section == f.section && key == f.key) {
        try {
          f.set(value);
        } catch (const Error& e) {
          throw FormatError(where + e.what());
        } catch (const std::exception& e) {
          throw FormatError(where + "invalid value '" + value + "'");
        }
        found = true;
        break;
      }
    }
    if (!found) throw FormatError(where + "unknown key '" + key + "' in section [" + section + "]");
  }
  try {
    c.sim.validate();
    c.sampling.validate();
    c.features.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("invalid configuration: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out << to_text();
}

void save_dataset_dir(const std::filesystem::path& dir, const GeneratedDataset& data,
                      const RunConfig& config) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "manifest.csv");
    if (!out) throw FormatError("cannot write manifest in '" + dir.string() + "'");
    write_manifest(out, data.manifest);
  }
  {
    std::ofstream out(dir / "features.csv");
    if (!out) throw FormatError("cannot write features in '" + dir.string() + "'");
    write_features(out, data.features);
  }
  std::ofstream out(dir / "dataset.cfg");
  if (!out) throw FormatError("cannot write dataset.cfg in '" + dir.string() + "'");
  out << config.to_text() << "\n[dataset]\n";
  std::string r_max;
  for (const auto& [radius, value] : data.r_max) {
    r_max += (r_max.empty() ? "" : ",") + format_double(radius) + ":" + format_double(value);
  }
  out << "r_max = " << r_max << '\n';
  out << "draws = " << data.draws << '\n';
  out << "rejected = " << data.rejected << '\n';
}

DatasetDir read_dataset_dir(const std::filesystem::path& dir) {
  DatasetDir d;
  {
    std::ifstream in(dir / "dataset.cfg");
    if (!in) throw FormatError("'" + dir.string() + "' has no dataset.cfg");
    std::ostringstream buf;
    buf << in.rdbuf();
    std::map<std::string, std::string> extra;
    d.config = RunConfig::parse(buf.str(), &extra);
    if (const auto it = extra.find("r_max"); it != extra.end() && !it->second.empty()) {
      for (const auto& item : split(it->second, ',')) {
        const auto kv = split(item, ':');
        if (kv.size() != 2) throw FormatError("r_max entries must be radius:value");
        d.r_max[parse_double(kv[0])] = parse_double(kv[1]);
      }
    }
  }
  {
    std::ifstream in(dir / "manifest.csv");
    if (!in) throw FormatError("'" + dir.string() + "' has no manifest.csv");
    d.manifest = read_manifest(in);
  }
  std::ifstream in(dir / "features.csv");
  if (!in) throw FormatError("'" + dir.string() + "' has no features.csv");
  d.features = read_features(in);
  return d;
}

Dataset load_dataset(const std::filesystem::path& dir, std::optional<double> radius) {
  const DatasetDir d = read_dataset_dir(dir);
  const double r = radius.value_or(d.config.features.radii.front());
  const auto it = d.r_max.find(r);
  if (it == d.r_max.end()) {
    throw FormatError("dataset has no features for radius " + format_double(r));
  }
  return make_dataset(d.manifest, d.features, r, it->second, d.config.features.bins,
                      d.config.features.spacing);
}

}  // namespace turing
