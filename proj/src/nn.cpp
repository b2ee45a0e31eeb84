#include "actevo/nn.hpp"

#include <algorithm>
#include <cmath>

#include "actevo/errors.hpp"

namespace actevo::nn {

using kernels::ActivationProgram;
using kernels::BatchNormCache;
using kernels::Matrix;

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

void NetworkConfig::validate() const {
  if (input_dim < 1 || num_classes < 1)
    throw ConfigError("network input_dim and num_classes must be positive");
  for (int w : hidden_layers)
    if (w < 1) throw ConfigError("hidden layer widths must be >= 1");
}

void TrainConfig::validate() const {
  if (epochs < 1 || batch_size < 1)
    throw ConfigError("epochs and batch_size must be positive");
  if (!(base_lr > 0)) throw ConfigError("base_lr must be positive");
  if (!(lr_decay_factor > 0) || !(lr_decay_factor < 1))
    throw ConfigError("lr_decay_factor must be in (0, 1)");
  if (!(momentum >= 0) || !(momentum < 1))
    throw ConfigError("momentum must be in [0, 1)");
  if (!(divergence_loss_cap > 0))
    throw ConfigError("divergence_loss_cap must be positive");
  int prev = 0;
  for (int e : lr_decay_epochs) {
    if (e <= prev || e >= epochs)
      throw ConfigError("lr decay epochs must be strictly increasing and < epochs");
    prev = e;
  }
}

Network::Network(const NetworkConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  std::vector<int> widths;
  widths.push_back(cfg_.input_dim);
  for (int w : cfg_.hidden_layers) widths.push_back(w);
  widths.push_back(cfg_.num_classes);

  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer;
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    layer.W = Matrix(fan_in, fan_out);
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& w : layer.W.data) w = scale * rng.gaussian();
    layer.b.assign(fan_out, 0.0);
    dense_.push_back(std::move(layer));
  }
  if (cfg_.batch_norm) {
    for (int w : cfg_.hidden_layers) {
      BatchNormLayer bn;
      bn.gamma.assign(w, 1.0);
      bn.beta.assign(w, 0.0);
      bn.running_mean.assign(w, 0.0);
      bn.running_var.assign(w, 1.0);
      bn_.push_back(std::move(bn));
    }
  }
}

Network init_network(const NetworkConfig& cfg, Rng& rng) {
  return Network(cfg, rng);
}

std::vector<std::vector<double>*> Network::parameter_blocks() {
  std::vector<std::vector<double>*> blocks;
  for (std::size_t l = 0; l < dense_.size(); ++l) {
    blocks.push_back(&dense_[l].W.data);
    blocks.push_back(&dense_[l].b);
    if (cfg_.batch_norm && l < bn_.size()) {
      blocks.push_back(&bn_[l].gamma);
      blocks.push_back(&bn_[l].beta);
    }
  }
  return blocks;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& d : dense_) n += d.W.data.size() + d.b.size();
  for (const auto& b : bn_) n += b.gamma.size() + b.beta.size();
  return n;
}

void nesterov_lookahead(std::span<double> theta,
                        std::span<const double> velocity, double momentum) {
  for (std::size_t k = 0; k < theta.size(); ++k)
    theta[k] += momentum * velocity[k];
}

void nesterov_update(std::span<double> theta, std::span<const double> saved,
                     std::span<double> velocity, std::span<const double> grad,
                     double lr, double momentum) {
  for (std::size_t k = 0; k < theta.size(); ++k) {
    velocity[k] = momentum * velocity[k] - lr * grad[k];
    theta[k] = saved[k] + velocity[k];
  }
}

std::vector<int> default_decay_epochs(int epochs) {
  std::vector<int> out;
  for (double frac : {0.5, 0.8, 0.9}) {
    const int e = static_cast<int>(frac * epochs);
    if (e >= 1 && e < epochs && (out.empty() || e > out.back())) out.push_back(e);
  }
  return out;
}

double lr_for_epoch(const TrainConfig& tc, int epoch) {
  const std::vector<int> decay =
      tc.lr_decay_epochs.empty() ? default_decay_epochs(tc.epochs)
                                 : tc.lr_decay_epochs;
  double lr = tc.base_lr;
  for (int d : decay)
    if (d < epoch) lr *= tc.lr_decay_factor;
  return lr;
}

namespace {

struct LayerCache {
  Matrix pre;        // linear output
  Matrix bn_out;     // after batch norm (or == pre)
  Matrix act;        // activation values
  Matrix act_deriv;  // activation derivative at bn_out
  BatchNormCache bn;
};

struct ForwardScratch {
  std::vector<LayerCache> layers;
  Matrix logits;
};

// Training-mode forward. Returns false as soon as anything non-finite
// shows up; pre-activation checks keep NaN from being masked downstream.
bool forward_train_pass(Network& net, const ActivationProgram& program,
                        const Matrix& X, ForwardScratch& s) {
  const auto& dense = net.dense();
  const auto& bn = net.batchnorm();
  const int hidden = static_cast<int>(dense.size()) - 1;
  s.layers.resize(hidden);

  const Matrix* a = &X;
  for (int l = 0; l < hidden; ++l) {
    LayerCache& c = s.layers[l];
    const int width = dense[l].W.cols;
    c.pre = Matrix(a->rows, width);
    kernels::dense_forward(*a, dense[l].W, dense[l].b, c.pre);
    if (!all_finite(c.pre.data)) return false;
    if (net.config().batch_norm) {
      c.bn_out = Matrix(a->rows, width);
      kernels::batchnorm_forward_train(c.pre, bn[l].gamma, bn[l].beta, kBnEps,
                                       c.bn_out, c.bn);
      if (!all_finite(c.bn_out.data)) return false;
    } else {
      c.bn_out = c.pre;
    }
    c.act = Matrix(a->rows, width);
    c.act_deriv = Matrix(a->rows, width);
    if (!program.forward(c.bn_out.data, c.act.data, c.act_deriv.data))
      return false;
    a = &c.act;
  }
  const DenseLayer& out = dense.back();
  s.logits = Matrix(a->rows, out.W.cols);
  kernels::dense_forward(*a, out.W, out.b, s.logits);
  return all_finite(s.logits.data);
}

// Backward through the whole stack; gradient blocks align with
// Network::parameter_blocks(). Returns false on non-finite gradients.
bool backward_pass(Network& net, const Matrix& X, ForwardScratch& s,
                   const Matrix& dlogits,
                   std::vector<std::vector<double>>& grads) {
  auto& dense = net.dense();
  auto& bn = net.batchnorm();
  const int hidden = static_cast<int>(dense.size()) - 1;
  const bool use_bn = net.config().batch_norm;

  grads.clear();
  std::vector<std::vector<double>> dW(hidden + 1), db(hidden + 1);
  std::vector<std::vector<double>> dgamma(hidden), dbeta(hidden);

  const Matrix& last_act = hidden > 0 ? s.layers[hidden - 1].act : X;
  Matrix dW_out(dense[hidden].W.rows, dense[hidden].W.cols);
  db[hidden].assign(dense[hidden].b.size(), 0.0);
  Matrix da(last_act.rows, last_act.cols);
  kernels::dense_backward(last_act, dense[hidden].W, dlogits, &da, dW_out,
                          db[hidden]);
  dW[hidden] = std::move(dW_out.data);

  for (int l = hidden - 1; l >= 0; --l) {
    LayerCache& c = s.layers[l];
    // through the activation: dL/d(bn_out) = dL/d(act) * f'(bn_out)
    Matrix dbn(da.rows, da.cols);
    for (std::size_t i = 0; i < dbn.data.size(); ++i)
      dbn.data[i] = da.data[i] * c.act_deriv.data[i];

    Matrix dpre(da.rows, da.cols);
    if (use_bn) {
      dgamma[l].assign(bn[l].gamma.size(), 0.0);
      dbeta[l].assign(bn[l].beta.size(), 0.0);
      kernels::batchnorm_backward(dbn, c.bn, bn[l].gamma, dpre, dgamma[l],
                                  dbeta[l]);
    } else {
      dpre = std::move(dbn);
    }

    const Matrix& input = l > 0 ? s.layers[l - 1].act : X;
    Matrix dW_l(dense[l].W.rows, dense[l].W.cols);
    db[l].assign(dense[l].b.size(), 0.0);
    Matrix da_prev(input.rows, input.cols);
    kernels::dense_backward(input, dense[l].W, dpre,
                            l > 0 ? &da_prev : nullptr, dW_l, db[l]);
    dW[l] = std::move(dW_l.data);
    da = std::move(da_prev);
  }

  for (int l = 0; l <= hidden; ++l) {
    grads.push_back(std::move(dW[l]));
    grads.push_back(std::move(db[l]));
    if (use_bn && l < hidden) {
      grads.push_back(std::move(dgamma[l]));
      grads.push_back(std::move(dbeta[l]));
    }
  }
  for (const auto& g : grads)
    if (!all_finite(g)) return false;
  return true;
}

void gather_batch(const data::Dataset& ds, const std::vector<int>& order,
                  int lo, int hi, Matrix& X, std::vector<int>& y) {
  const int m = hi - lo;
  X = Matrix(m, ds.dim());
  y.resize(m);
  for (int i = 0; i < m; ++i) {
    const int src = order[lo + i];
    const double* row = ds.features.row(src);
    std::copy(row, row + ds.dim(), X.row(i));
    y[i] = ds.labels[src];
  }
}

}  // namespace

bool compute_gradients(Network& net, const expr::ExprTree& activation,
                       const Matrix& X, const std::vector<int>& y,
                       const num::SafetyPolicy& policy,
                       std::vector<std::vector<double>>& grads,
                       double* loss_out) {
  const ActivationProgram program(activation, policy);
  ForwardScratch s;
  if (!forward_train_pass(net, program, X, s)) return false;
  std::vector<double> per_row(X.rows);
  Matrix dlogits(s.logits.rows, s.logits.cols);
  kernels::softmax_xent(s.logits, y, per_row, &dlogits, nullptr);
  double loss = 0.0;
  for (double v : per_row) loss += v;
  loss /= X.rows;
  if (loss_out != nullptr) *loss_out = loss;
  if (!std::isfinite(loss)) return false;
  return backward_pass(net, X, s, dlogits, grads);
}

TrainingMetrics train(Network& net, const expr::ExprTree& activation,
                      const data::Dataset& dataset, const TrainConfig& tc,
                      const num::SafetyPolicy& policy) {
  tc.validate();
  policy.validate();
  if (dataset.train_idx.empty() || dataset.val_idx.empty())
    throw ConfigError("train requires assigned train and validation splits");

  const ActivationProgram program(activation, policy);
  auto blocks = net.parameter_blocks();
  auto& bn = net.batchnorm();

  std::vector<std::vector<double>> velocity, saved;
  velocity.reserve(blocks.size());
  for (auto* b : blocks) velocity.emplace_back(b->size(), 0.0);
  saved.resize(blocks.size());

  TrainingMetrics metrics;
  auto diverge = [&]() {
    metrics.status = TrainStatus::kDiverged;
    metrics.final_val_loss = tc.divergence_loss_cap;
    metrics.final_val_acc = 0.0;
    return metrics;
  };

  Rng shuffle_rng(derive_seed(tc.seed, {0x73687566ULL}));
  std::vector<int> order(dataset.train_idx);

  Matrix X;
  std::vector<int> y;
  ForwardScratch scratch;
  std::vector<std::vector<double>> grads;

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    const double lr = lr_for_epoch(tc, epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = shuffle_rng.uniform_int(i);
      std::swap(order[i - 1], order[j]);
    }

    double epoch_loss = 0.0;
    int seen = 0;
    const int n = static_cast<int>(order.size());
    for (int lo = 0; lo < n; lo += tc.batch_size) {
      const int hi = std::min(n, lo + tc.batch_size);
      gather_batch(dataset, order, lo, hi, X, y);

      // Evaluate the gradient at theta + mu * v.
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        saved[b] = *blocks[b];
        nesterov_lookahead(*blocks[b], velocity[b], tc.momentum);
      }

      double loss = 0.0;
      bool ok = forward_train_pass(net, program, X, scratch);
      if (ok) {
        std::vector<double> per_row(X.rows);
        Matrix dlogits(scratch.logits.rows, scratch.logits.cols);
        kernels::softmax_xent(scratch.logits, y, per_row, &dlogits, nullptr);
        for (double v : per_row) loss += v;
        loss /= X.rows;
        ok = std::isfinite(loss) && backward_pass(net, X, scratch, dlogits, grads);
      }
      if (!ok) return diverge();

      for (std::size_t b = 0; b < blocks.size(); ++b)
        nesterov_update(*blocks[b], saved[b], velocity[b], grads[b], lr,
                        tc.momentum);

      // Running statistics track the batch stats seen during the step.
      for (std::size_t l = 0; l < bn.size(); ++l) {
        const auto& cache = scratch.layers[l].bn;
        for (std::size_t j = 0; j < bn[l].running_mean.size(); ++j) {
          bn[l].running_mean[j] = (1.0 - kBnMomentum) * bn[l].running_mean[j] +
                                  kBnMomentum * cache.mean[j];
          bn[l].running_var[j] = (1.0 - kBnMomentum) * bn[l].running_var[j] +
                                 kBnMomentum * cache.var[j];
        }
      }

      epoch_loss += loss * (hi - lo);
      seen += hi - lo;
    }

    const auto [val_loss, val_acc] =
        evaluate(net, activation, dataset, data::Split::kVal, policy);
    if (!std::isfinite(val_loss)) return diverge();
    metrics.per_epoch.push_back({epoch_loss / seen, val_loss, val_acc});
    metrics.final_val_loss = val_loss;
    metrics.final_val_acc = val_acc;
  }

  metrics.status = TrainStatus::kCompleted;
  return metrics;
}

std::pair<double, double> evaluate(const Network& net,
                                   const expr::ExprTree& activation,
                                   const data::Dataset& dataset,
                                   data::Split split,
                                   const num::SafetyPolicy& policy) {
  const std::vector<int>& idx = dataset.split(split);
  if (idx.empty()) throw ConfigError("evaluate: split is empty");

  const ActivationProgram program(activation, policy);
  const auto& dense = net.dense();
  const auto& bn = net.batchnorm();
  const int hidden = static_cast<int>(dense.size()) - 1;

  constexpr int kEvalBatch = 512;
  double total_loss = 0.0;
  int total_correct = 0;

  Matrix X;
  std::vector<int> y;
  for (std::size_t lo = 0; lo < idx.size(); lo += kEvalBatch) {
    const std::size_t hi = std::min(idx.size(), lo + kEvalBatch);
    gather_batch(dataset, idx, static_cast<int>(lo), static_cast<int>(hi), X, y);

    Matrix a = std::move(X);
    for (int l = 0; l < hidden; ++l) {
      Matrix pre(a.rows, dense[l].W.cols);
      kernels::dense_forward(a, dense[l].W, dense[l].b, pre);
      Matrix z(a.rows, pre.cols);
      if (net.config().batch_norm) {
        kernels::batchnorm_forward_infer(pre, bn[l].gamma, bn[l].beta,
                                         bn[l].running_mean, bn[l].running_var,
                                         kBnEps, z);
      } else {
        z = std::move(pre);
      }
      Matrix f(z.rows, z.cols), fp(z.rows, z.cols);
      program.forward(z.data, f.data, fp.data);
      a = std::move(f);
    }
    Matrix logits(a.rows, dense[hidden].W.cols);
    kernels::dense_forward(a, dense[hidden].W, dense[hidden].b, logits);

    std::vector<double> per_row(logits.rows);
    int correct = 0;
    kernels::softmax_xent(logits, y, per_row, nullptr, &correct);
    for (double v : per_row) total_loss += v;
    total_correct += correct;
  }

  return {total_loss / idx.size(),
          static_cast<double>(total_correct) / idx.size()};
}

}  // namespace actevo::nn
