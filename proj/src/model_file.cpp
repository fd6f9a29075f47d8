#include "turing/model_file.hpp"

#include <array>
#include <fstream>

#include "binary_io.hpp"
#include "turing/error.hpp"

namespace turing {

namespace {

constexpr std::array<char, 4> kModelMagic{'T', 'M', 'O', 'D'};
constexpr std::uint32_t kModelVersion = 1;
constexpr std::uint32_t kMaxCount = 1u << 26;

void put_u32(std::ostream& out, std::size_t v) {
  if (v > 0xffffffffu) throw FormatError("value too large for the model format");
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(v));
}
void put_f64(std::ostream& out, double v) { detail::put_le<double>(out, v); }
void put_u8(std::ostream& out, unsigned v) { detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(v)); }

std::uint32_t get_u32(std::istream& in) {
  const auto v = detail::get_le<std::uint32_t>(in, "model file");
  if (v > kMaxCount) throw FormatError("model file has an implausible size field");
  return v;
}
double get_f64(std::istream& in) { return detail::get_le<double>(in, "model file"); }
std::uint8_t get_u8(std::istream& in) { return detail::get_le<std::uint8_t>(in, "model file"); }

void put_points(std::ostream& out, const PointSet& points, std::size_t dim) {
  for (const auto& p : points) {
    if (p.size() != dim) throw ShapeError("points differ in dimension");
    for (double v : p) put_f64(out, v);
  }
}

PointSet get_points(std::istream& in, std::size_t n, std::size_t dim) {
  PointSet points(n, std::vector<double>(dim));
  for (auto& p : points) {
    for (double& v : p) v = get_f64(in);
  }
  return points;
}

void put_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index k = 0; k < m.size(); ++k) put_f64(out, m.data()[k]);
}

Eigen::MatrixXd get_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = get_f64(in);
  return m;
}

KernelKind kernel_from_tag(std::uint8_t tag) {
  if (tag > static_cast<std::uint8_t>(KernelKind::gaussian_output)) throw FormatError("unknown kernel tag in model file");
  return static_cast<KernelKind>(tag);
}

std::size_t dim_of(const PointSet& points) { return points.empty() ? 0 : points.front().size(); }

}  // namespace

void write_model(std::ostream& out, const TrainedModel& model) {
  out.write(kModelMagic.data(), kModelMagic.size());
  put_u32(out, kModelVersion);
  put_u8(out, static_cast<unsigned>(model.method));
  put_u32(out, model.targets.size());
  for (std::size_t t : model.targets) put_u32(out, t);
  if (model.normalizer.maxima.size() != model.targets.size()) throw ShapeError("normalizer does not match targets");
  for (double m : model.normalizer.maxima) put_f64(out, m);
  put_f64(out, model.rdh.radius);
  put_u32(out, model.rdh.spacing);
  put_u32(out, model.rdh.bins);
  put_f64(out, model.rdh.r_max);
  put_u8(out, model.use_cm ? 1 : 0);
  detail::put_le<std::uint64_t>(out, model.split_seed);
  put_f64(out, model.validation_nrmse);

  switch (model.method) {
    case Method::svr:
      put_u32(out, model.svr.size());
      for (const auto& m : model.svr) {
        put_u8(out, static_cast<unsigned>(m.kernel.kind));
        put_f64(out, m.kernel.gamma);
        put_f64(out, m.lambda);
        put_f64(out, m.epsilon_tube);
        put_f64(out, m.kkt_residual);
        put_f64(out, m.objective);
        const std::size_t dim = dim_of(m.training_inputs);
        put_u32(out, m.training_inputs.size());
        put_u32(out, dim);
        put_points(out, m.training_inputs, dim);
        if (m.alphas.size() != m.training_inputs.size()) throw ShapeError("SVR coefficients do not match inputs");
        for (double a : m.alphas) put_f64(out, a);
      }
      break;
    case Method::ovk: {
      if (!model.ovk) throw Error("model has no operator-valued kernel payload");
      const OvkModel& m = *model.ovk;
      put_u8(out, static_cast<unsigned>(m.input_kernel.kind));
      put_f64(out, m.input_kernel.gamma);
      put_f64(out, m.output_kernel.gamma);
      put_f64(out, m.lambda);
      put_f64(out, m.eps_reg);
      put_f64(out, m.gmres_residual);
      const std::size_t n = m.training_inputs.size();
      const std::size_t din = dim_of(m.training_inputs);
      const std::size_t dout = dim_of(m.training_targets);
      put_u32(out, n);
      put_u32(out, din);
      put_u32(out, dout);
      put_points(out, m.training_inputs, din);
      put_points(out, m.training_targets, dout);
      const auto ni = static_cast<Eigen::Index>(n);
      if (m.t_n.rows() != ni || m.t_n.cols() != ni || m.u.rows() != ni || m.u.cols() != ni) {
        throw ShapeError("operator-valued model matrices have the wrong size");
      }
      put_matrix(out, m.t_n);
      put_matrix(out, m.u);
      break;
    }
    case Method::ffnn: {
      if (!model.ffnn) throw Error("model has no network payload");
      const FfnnModel& m = *model.ffnn;
      m.validate();
      put_u32(out, m.input_dim);
      put_u32(out, m.output_dim);
      put_u32(out, m.hidden.size());
      for (std::size_t w : m.hidden) put_u32(out, w);
      const Eigen::VectorXd p = m.parameters();
      put_u32(out, static_cast<std::size_t>(p.size()));
      for (Eigen::Index k = 0; k < p.size(); ++k) put_f64(out, p(k));
      break;
    }
  }
  if (!out) throw FormatError("failed to write model");
}

TrainedModel read_model(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kModelMagic) throw FormatError("not a model file (bad magic)");
  const auto version = get_u32(in);
  if (version != kModelVersion) throw FormatError("unsupported model file version " + std::to_string(version));
  TrainedModel model;
  const auto tag = get_u8(in);
  if (tag > static_cast<std::uint8_t>(Method::ffnn)) throw FormatError("unknown method tag in model file");
  model.method = static_cast<Method>(tag);
  const auto n_targets = get_u32(in);
  for (std::uint32_t k = 0; k < n_targets; ++k) {
    const auto t = get_u32(in);
    if (t >= 5) throw FormatError("target index out of range in model file");
    model.targets.push_back(t);
  }
  for (std::uint32_t k = 0; k < n_targets; ++k) model.normalizer.maxima.push_back(get_f64(in));
  model.rdh.radius = get_f64(in);
  model.rdh.spacing = get_u32(in);
  model.rdh.bins = get_u32(in);
  model.rdh.r_max = get_f64(in);
  model.use_cm = get_u8(in) != 0;
  model.split_seed = detail::get_le<std::uint64_t>(in, "model file");
  model.validation_nrmse = get_f64(in);

  switch (model.method) {
    case Method::svr: {
      const auto count = get_u32(in);
      for (std::uint32_t k = 0; k < count; ++k) {
        SvrModel m;
        m.kernel.kind = kernel_from_tag(get_u8(in));
        m.kernel.gamma = get_f64(in);
        m.lambda = get_f64(in);
        m.epsilon_tube = get_f64(in);
        m.kkt_residual = get_f64(in);
        m.objective = get_f64(in);
        const auto n = get_u32(in);
        const auto dim = get_u32(in);
        m.training_inputs = get_points(in, n, dim);
        m.alphas.resize(n);
        for (double& a : m.alphas) a = get_f64(in);
        model.svr.push_back(std::move(m));
      }
      if (model.svr.size() != model.targets.size()) throw FormatError("SVR model count does not match targets");
      break;
    }
    case Method::ovk: {
      OvkModel m;
      m.input_kernel.kind = kernel_from_tag(get_u8(in));
      m.input_kernel.gamma = get_f64(in);
      m.output_kernel = KernelSpec{KernelKind::gaussian_output, get_f64(in)};
      m.lambda = get_f64(in);
      m.eps_reg = get_f64(in);
      m.gmres_residual = get_f64(in);
      const auto n = get_u32(in);
      const auto din = get_u32(in);
      const auto dout = get_u32(in);
      m.training_inputs = get_points(in, n, din);
      m.training_targets = get_points(in, n, dout);
      m.t_n = get_matrix(in, n, n);
      m.u = get_matrix(in, n, n);
      m.k_n = gram_matrix(m.training_inputs, m.input_kernel);
      m.l_n = gram_matrix(m.training_targets, m.output_kernel);
      model.ovk = std::move(m);
      break;
    }
    case Method::ffnn: {
      FfnnModel m;
      m.input_dim = get_u32(in);
      m.output_dim = get_u32(in);
      const auto layers = get_u32(in);
      for (std::uint32_t k = 0; k < layers; ++k) m.hidden.push_back(get_u32(in));
      m = FfnnModel::initialize(m.input_dim, m.hidden, m.output_dim, 0);
      const auto count = get_u32(in);
      if (count != m.parameter_count()) throw FormatError("network parameter count does not match its shape");
      Eigen::VectorXd p(count);
      for (Eigen::Index k = 0; k < p.size(); ++k) p(k) = get_f64(in);
      m.set_parameters(p);
      model.ffnn = std::move(m);
      break;
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after model data");
  return model;
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  write_model(out, model);
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file '" + path.string() + "'");
  return read_model(in);
}

}  // namespace turing
