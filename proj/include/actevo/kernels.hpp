#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "actevo/expr.hpp"
#include "actevo/numerics.hpp"

namespace actevo::kernels {

// Every kernel has one code path; kParallel only distributes independent
// output elements across OpenMP threads. No reduction order ever changes,
// so both backends produce bit-identical results (tested).
enum class Backend { kSerial, kParallel };

void set_backend(Backend b);
Backend backend();

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // row-major

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
  const double* row(int i) const {
    return data.data() + static_cast<std::size_t>(i) * cols;
  }
  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const {
    return data[static_cast<std::size_t>(i) * cols + j];
  }
};

// Y = X * W + b, parallel over rows of X.
void dense_forward(const Matrix& X, const Matrix& W, std::span<const double> b,
                   Matrix& Y);

// Gradients of the dense layer. dX may be null for the input layer.
// dW rows are partitioned across threads; each row accumulates serially.
void dense_backward(const Matrix& X, const Matrix& W, const Matrix& dY,
                    Matrix* dX, Matrix& dW, std::span<double> db);

struct BatchNormCache {
  std::vector<double> mean, var, inv_std;
  Matrix xhat;
};

// Training-mode batch norm, parallel over features. Batch statistics use
// the biased variance.
void batchnorm_forward_train(const Matrix& X, std::span<const double> gamma,
                             std::span<const double> beta, double eps,
                             Matrix& Y, BatchNormCache& cache);

void batchnorm_forward_infer(const Matrix& X, std::span<const double> gamma,
                             std::span<const double> beta,
                             std::span<const double> running_mean,
                             std::span<const double> running_var, double eps,
                             Matrix& Y);

void batchnorm_backward(const Matrix& dY, const BatchNormCache& cache,
                        std::span<const double> gamma, Matrix& dX,
                        std::span<double> dgamma, std::span<double> dbeta);

// Expression tree flattened to a postorder instruction list, evaluated over
// batches in chunks. Shares the scalar operator semantics with
// num::eval_dual, so the chunked path matches the recursive reference
// bit for bit.
class ActivationProgram {
 public:
  ActivationProgram(const expr::ExprTree& tree, num::SafetyPolicy policy);

  // f and fp receive value and derivative per element. Returns false when
  // any output is non-finite.
  bool forward(std::span<const double> x, std::span<double> f,
               std::span<double> fp) const;

  int instruction_count() const { return static_cast<int>(code_.size()); }

 private:
  struct Instr {
    expr::ExprNode::Kind kind;
    expr::UnaryOp unary;
    expr::BinaryOp binary;
    int lhs = -1;  // register indices
    int rhs = -1;
  };

  std::vector<Instr> code_;
  num::SafetyPolicy policy_;
};

// Stable softmax + cross-entropy over logit rows. per_row_loss[i] gets the
// sample loss; dlogits gets (softmax - onehot) / rows; correct counts top-1
// hits with ties resolved to the lowest class index.
void softmax_xent(const Matrix& logits, std::span<const int> labels,
                  std::span<double> per_row_loss, Matrix* dlogits,
                  int* correct);

}  // namespace actevo::kernels
