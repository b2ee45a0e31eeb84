#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "actevo/data.hpp"
#include "actevo/expr.hpp"
#include "actevo/kernels.hpp"
#include "actevo/numerics.hpp"
#include "actevo/rng.hpp"

namespace actevo::nn {

struct NetworkConfig {
  int input_dim = 2;
  std::vector<int> hidden_layers{64, 64};
  int num_classes = 3;
  bool batch_norm = true;

  void validate() const;
};

struct TrainConfig {
  int epochs = 20;
  int batch_size = 128;
  double base_lr = 0.1;
  double lr_decay_factor = 0.2;
  // Empty means the step points are derived from the epoch count at 50%,
  // 80% and 90%, preserving the shape of the full-scale schedule.
  std::vector<int> lr_decay_epochs;
  double momentum = 0.9;  // Nesterov
  std::uint64_t seed = 0;
  double divergence_loss_cap = 20.0;

  void validate() const;
};

enum class TrainStatus { kCompleted, kDiverged };

struct EpochStats {
  double train_loss;
  double val_loss;
  double val_acc;
};

struct TrainingMetrics {
  double final_val_loss = 0.0;
  double final_val_acc = 0.0;
  std::vector<EpochStats> per_epoch;
  TrainStatus status = TrainStatus::kCompleted;
};

struct DenseLayer {
  kernels::Matrix W;
  std::vector<double> b;
};

struct BatchNormLayer {
  std::vector<double> gamma, beta, running_mean, running_var;
};

// Dense MLP whose hidden nonlinearity is an arbitrary expression tree.
// Each hidden block is linear -> batch norm -> activation; the output
// layer is linear into softmax cross-entropy.
class Network {
 public:
  Network(const NetworkConfig& cfg, Rng& rng);

  const NetworkConfig& config() const { return cfg_; }
  std::vector<DenseLayer>& dense() { return dense_; }
  const std::vector<DenseLayer>& dense() const { return dense_; }
  std::vector<BatchNormLayer>& batchnorm() { return bn_; }
  const std::vector<BatchNormLayer>& batchnorm() const { return bn_; }

  // Trainable parameter blocks in a fixed order (per layer: W, b, then
  // gamma, beta when batch norm is on). Running statistics are not
  // parameters.
  std::vector<std::vector<double>*> parameter_blocks();
  std::size_t parameter_count() const;

 private:
  NetworkConfig cfg_;
  std::vector<DenseLayer> dense_;
  std::vector<BatchNormLayer> bn_;
};

Network init_network(const NetworkConfig& cfg, Rng& rng);

// The two halves of a Nesterov step, split so the update rule is testable
// against a hand-unrolled sequence: first theta += mu * v (the lookahead
// point where the gradient is taken), then v = mu * v - lr * g and
// theta = saved + v.
void nesterov_lookahead(std::span<double> theta, std::span<const double> velocity,
                        double momentum);
void nesterov_update(std::span<double> theta, std::span<const double> saved,
                     std::span<double> velocity, std::span<const double> grad,
                     double lr, double momentum);

// Derived decay points for the default schedule.
std::vector<int> default_decay_epochs(int epochs);

// Learning rate for a 1-based epoch index: decays fire after each listed
// epoch.
double lr_for_epoch(const TrainConfig& tc, int epoch);

// Mini-batch SGD with Nesterov momentum (v <- mu v - lr grad(theta + mu v);
// theta <- theta + v) on softmax cross-entropy. Any non-finite loss,
// activation output or gradient halts training immediately with
// status=diverged and capped metrics. Deterministic given tc.seed.
TrainingMetrics train(Network& net, const expr::ExprTree& activation,
                      const data::Dataset& dataset, const TrainConfig& tc,
                      const num::SafetyPolicy& policy);

// Mean cross-entropy and top-1 accuracy over a split, batch norm in
// inference mode.
std::pair<double, double> evaluate(const Network& net,
                                   const expr::ExprTree& activation,
                                   const data::Dataset& dataset,
                                   data::Split split,
                                   const num::SafetyPolicy& policy);

// Analytic gradients of the mean training loss for one batch, training-mode
// forward. Blocks align with parameter_blocks(). Returns false when
// anything non-finite appeared. Exposed for the finite-difference tests.
bool compute_gradients(Network& net, const expr::ExprTree& activation,
                       const kernels::Matrix& X, const std::vector<int>& y,
                       const num::SafetyPolicy& policy,
                       std::vector<std::vector<double>>& grads,
                       double* loss_out);

}  // namespace actevo::nn
