#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace turing {

/// Fully connected ReLU network with a linear output layer. Samples are columns.
struct FfnnModel {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::vector<std::size_t> hidden;
  std::vector<Eigen::MatrixXd> weights;  ///< weights[j] is (out_j x in_j)
  std::vector<Eigen::VectorXd> biases;

  /// He-uniform weights (bound sqrt(6 / fan_in)), zero biases.
  static FfnnModel initialize(std::size_t input_dim, std::vector<std::size_t> hidden,
                              std::size_t output_dim, std::uint64_t seed);

  void validate() const;
  std::size_t parameter_count() const;
  /// All weights (column-major) then biases, layer by layer.
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& p);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  std::vector<double> forward(std::span<const double> x) const;
};

/// (1 / (n d)) sum of squared errors over all samples and outputs.
double mse_loss(const FfnnModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

struct FfnnGradient {
  double loss = 0.0;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  /// Same layout as FfnnModel::parameters().
  Eigen::VectorXd flatten() const;
};

FfnnGradient ffnn_gradient(const FfnnModel& model, const Eigen::MatrixXd& x,
                           const Eigen::MatrixXd& y);

struct TrainSchedule {
  long max_steps = 200000;
  long patience = 50000;
  std::size_t batch_size = 0;  ///< 0: full batch up to 1000 samples, else 128
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
  /// Step budget and patience by training-set size.
  static TrainSchedule for_dataset_size(std::size_t n);

  friend bool operator==(const TrainSchedule&, const TrainSchedule&) = default;
};

struct FfnnTrainReport {
  double initial_validation_loss = 0.0;
  double best_validation_loss = 0.0;
  long best_step = 0;
  long steps = 0;
  bool stopped_early = false;
};

/// Adam on the MSE with early stopping; returns the snapshot with the lowest
/// validation loss seen along the trajectory.
FfnnModel ffnn_train(const Eigen::MatrixXd& x_train, const Eigen::MatrixXd& y_train,
                     const Eigen::MatrixXd& x_val, const Eigen::MatrixXd& y_val,
                     const std::vector<std::size_t>& hidden, const TrainSchedule& schedule,
                     FfnnTrainReport* report = nullptr);

/// Hidden-layer shapes evaluated in the architecture search.
std::vector<std::vector<std::size_t>> default_architectures();

}  // namespace turing
