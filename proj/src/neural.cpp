#include "turing/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "turing/error.hpp"

namespace turing {

namespace {

double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

void check_data(const FfnnModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (static_cast<std::size_t>(x.rows()) != model.input_dim) throw ShapeError("input rows do not match the network");
  if (static_cast<std::size_t>(y.rows()) != model.output_dim) throw ShapeError("target rows do not match the network");
  if (x.cols() != y.cols()) throw ShapeError("inputs and targets differ in sample count");
  if (x.cols() == 0) throw ShapeError("empty batch");
}

}  // namespace

FfnnModel FfnnModel::initialize(std::size_t input_dim, std::vector<std::size_t> hidden,
                                std::size_t output_dim, std::uint64_t seed) {
  if (input_dim == 0 || output_dim == 0) throw DomainError("network dimensions must be positive");
  FfnnModel model;
  model.input_dim = input_dim;
  model.output_dim = output_dim;
  model.hidden = std::move(hidden);
  std::mt19937_64 rng(seed);
  std::size_t fan_in = input_dim;
  std::vector<std::size_t> widths = model.hidden;
  widths.push_back(output_dim);
  for (std::size_t width : widths) {
    if (width == 0) throw DomainError("layer width must be positive");
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Eigen::MatrixXd w(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(fan_in));
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = bound * (2.0 * uniform_unit(rng) - 1.0);
    }
    model.weights.push_back(std::move(w));
    model.biases.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width)));
    fan_in = width;
  }
  return model;
}

void FfnnModel::validate() const {
  if (weights.size() != hidden.size() + 1 || biases.size() != weights.size()) {
    throw ShapeError("layer count does not match the architecture");
  }
  std::size_t fan_in = input_dim;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const std::size_t width = j < hidden.size() ? hidden[j] : output_dim;
    if (static_cast<std::size_t>(weights[j].rows()) != width ||
        static_cast<std::size_t>(weights[j].cols()) != fan_in ||
        static_cast<std::size_t>(biases[j].size()) != width) {
      throw ShapeError("layer " + std::to_string(j) + " has inconsistent dimensions");
    }
    fan_in = width;
  }
}

std::size_t FfnnModel::parameter_count() const {
  std::size_t count = 0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    count += static_cast<std::size_t>(weights[j].size() + biases[j].size());
  }
  return count;
}

Eigen::VectorXd FfnnModel::parameters() const {
  Eigen::VectorXd p(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index at = 0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    p.segment(at, weights[j].size()) = weights[j].reshaped();
    at += weights[j].size();
    p.segment(at, biases[j].size()) = biases[j];
    at += biases[j].size();
  }
  return p;
}

void FfnnModel::set_parameters(const Eigen::VectorXd& p) {
  if (static_cast<std::size_t>(p.size()) != parameter_count()) throw ShapeError("parameter vector has wrong length");
  Eigen::Index at = 0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    weights[j].reshaped() = p.segment(at, weights[j].size());
    at += weights[j].size();
    biases[j] = p.segment(at, biases[j].size());
    at += biases[j].size();
  }
}

Eigen::MatrixXd FfnnModel::forward(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.rows()) != input_dim) throw ShapeError("input has wrong dimension");
  Eigen::MatrixXd a = x;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    Eigen::MatrixXd z = weights[j] * a;
    z.colwise() += biases[j];
    if (j + 1 < weights.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

std::vector<double> FfnnModel::forward(std::span<const double> x) const {
  const Eigen::MatrixXd in =
      Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::MatrixXd out = forward(in);
  return {out.data(), out.data() + out.size()};
}

double mse_loss(const FfnnModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  check_data(model, x, y);
  return (model.forward(x) - y).squaredNorm() / static_cast<double>(y.size());
}

Eigen::VectorXd FfnnGradient::flatten() const {
  std::size_t count = 0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    count += static_cast<std::size_t>(weights[j].size() + biases[j].size());
  }
  Eigen::VectorXd p(static_cast<Eigen::Index>(count));
  Eigen::Index at = 0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    p.segment(at, weights[j].size()) = weights[j].reshaped();
    at += weights[j].size();
    p.segment(at, biases[j].size()) = biases[j];
    at += biases[j].size();
  }
  return p;
}

FfnnGradient ffnn_gradient(const FfnnModel& model, const Eigen::MatrixXd& x,
                           const Eigen::MatrixXd& y) {
  check_data(model, x, y);
  const std::size_t layers = model.weights.size();
  std::vector<Eigen::MatrixXd> acts;  // acts[j] is the input of layer j
  acts.reserve(layers + 1);
  acts.push_back(x);
  for (std::size_t j = 0; j < layers; ++j) {
    Eigen::MatrixXd z = model.weights[j] * acts.back();
    z.colwise() += model.biases[j];
    if (j + 1 < layers) z = z.cwiseMax(0.0);
    acts.push_back(std::move(z));
  }

  FfnnGradient g;
  g.weights.resize(layers);
  g.biases.resize(layers);
  const Eigen::MatrixXd diff = acts.back() - y;
  const double scale = 1.0 / static_cast<double>(y.size());
  g.loss = diff.squaredNorm() * scale;
  Eigen::MatrixXd delta = 2.0 * scale * diff;
  for (std::size_t j = layers; j-- > 0;) {
    g.weights[j] = delta * acts[j].transpose();
    g.biases[j] = delta.rowwise().sum();
    if (j == 0) break;
    delta = model.weights[j].transpose() * delta;
    // ReLU derivative, taken as 0 at 0.
    delta = delta.cwiseProduct((acts[j].array() > 0.0).cast<double>().matrix());
  }
  return g;
}

void TrainSchedule::validate() const {
  if (max_steps < 1 || patience < 1) throw DomainError("step budget and patience must be positive");
  if (patience > max_steps) throw DomainError("patience must not exceed the step budget");
  if (!(learning_rate > 0.0)) throw DomainError("learning rate must be positive");
}

TrainSchedule TrainSchedule::for_dataset_size(std::size_t n) {
  TrainSchedule s;
  if (n <= 50) {
    s.max_steps = 400000;
    s.patience = 100000;
  } else if (n < 5000) {
    s.max_steps = 200000;
    s.patience = 50000;
  } else {
    s.max_steps = 100000;
    s.patience = 20000;
  }
  return s;
}

FfnnModel ffnn_train(const Eigen::MatrixXd& x_train, const Eigen::MatrixXd& y_train,
                     const Eigen::MatrixXd& x_val, const Eigen::MatrixXd& y_val,
                     const std::vector<std::size_t>& hidden, const TrainSchedule& schedule,
                     FfnnTrainReport* report) {
  schedule.validate();
  if (x_val.cols() == 0) throw ShapeError("validation split is empty");
  FfnnModel model = FfnnModel::initialize(static_cast<std::size_t>(x_train.rows()), hidden,
                                          static_cast<std::size_t>(y_train.rows()),
                                          schedule.seed);
  check_data(model, x_train, y_train);
  check_data(model, x_val, y_val);

  const auto n = static_cast<std::size_t>(x_train.cols());
  std::size_t batch = schedule.batch_size;
  if (batch == 0) batch = n <= 1000 ? n : 128;
  batch = std::min(batch, n);
  const bool full_batch = batch == n;

  std::mt19937_64 rng(schedule.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = n;

  Eigen::VectorXd params = model.parameters();
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(params.size());
  double pow1 = 1.0;
  double pow2 = 1.0;

  FfnnTrainReport rep;
  rep.initial_validation_loss = mse_loss(model, x_val, y_val);
  rep.best_validation_loss = rep.initial_validation_loss;
  Eigen::VectorXd best = params;

  Eigen::MatrixXd xb, yb;
  for (long step = 1; step <= schedule.max_steps; ++step) {
    FfnnGradient g;
    if (full_batch) {
      g = ffnn_gradient(model, x_train, y_train);
    } else {
      if (cursor + batch > n) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      xb.resize(x_train.rows(), static_cast<Eigen::Index>(batch));
      yb.resize(y_train.rows(), static_cast<Eigen::Index>(batch));
      for (std::size_t k = 0; k < batch; ++k) {
        xb.col(static_cast<Eigen::Index>(k)) = x_train.col(static_cast<Eigen::Index>(order[cursor + k]));
        yb.col(static_cast<Eigen::Index>(k)) = y_train.col(static_cast<Eigen::Index>(order[cursor + k]));
      }
      cursor += batch;
      g = ffnn_gradient(model, xb, yb);
    }
    if (!std::isfinite(g.loss)) throw TrainingError("training loss became non-finite", g.loss);

    const Eigen::VectorXd grad = g.flatten();
    pow1 *= schedule.beta1;
    pow2 *= schedule.beta2;
    m1 = schedule.beta1 * m1 + (1.0 - schedule.beta1) * grad;
    m2 = schedule.beta2 * m2 + (1.0 - schedule.beta2) * grad.cwiseProduct(grad);
    const Eigen::ArrayXd m1_hat = m1.array() / (1.0 - pow1);
    const Eigen::ArrayXd m2_hat = m2.array() / (1.0 - pow2);
    params.array() -= schedule.learning_rate * m1_hat / (m2_hat.sqrt() + schedule.adam_epsilon);
    model.set_parameters(params);

    rep.steps = step;
    const double val = mse_loss(model, x_val, y_val);
    if (!std::isfinite(val)) throw TrainingError("validation loss became non-finite", val);
    if (val < rep.best_validation_loss) {
      rep.best_validation_loss = val;
      rep.best_step = step;
      best = params;
    } else if (step - rep.best_step >= schedule.patience) {
      rep.stopped_early = true;
      break;
    }
  }
  model.set_parameters(best);
  if (report) *report = rep;
  return model;
}

std::vector<std::vector<std::size_t>> default_architectures() {
  return {{}, {2}, {5, 5}, {5, 10}, {10, 10}, {20}, {20, 20}};
}

}  // namespace turing
