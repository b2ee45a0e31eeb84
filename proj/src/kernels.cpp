#include "actevo/kernels.hpp"

#include <atomic>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace actevo::kernels {

namespace {

std::atomic<Backend> g_backend{Backend::kParallel};

inline bool parallel_enabled() {
#ifdef _OPENMP
  return g_backend.load(std::memory_order_relaxed) == Backend::kParallel &&
         omp_in_parallel() == 0;
#else
  return false;
#endif
}

}  // namespace

void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }
Backend backend() { return g_backend.load(std::memory_order_relaxed); }

void dense_forward(const Matrix& X, const Matrix& W, std::span<const double> b,
                   Matrix& Y) {
  const int n = X.rows, in = X.cols, out = W.cols;
  const bool par = parallel_enabled();
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < n; ++i) {
    const double* x = X.row(i);
    double* y = Y.row(i);
    for (int j = 0; j < out; ++j) y[j] = b[j];
    for (int k = 0; k < in; ++k) {
      const double xk = x[k];
      const double* w = W.row(k);
      for (int j = 0; j < out; ++j) y[j] += xk * w[j];
    }
  }
}

void dense_backward(const Matrix& X, const Matrix& W, const Matrix& dY,
                    Matrix* dX, Matrix& dW, std::span<double> db) {
  const int n = X.rows, in = X.cols, out = W.cols;
  const bool par = parallel_enabled();

  // dW[k] = sum_i X[i][k] * dY[i]; one thread owns each k row.
#pragma omp parallel for schedule(static) if (par)
  for (int k = 0; k < in; ++k) {
    double* dwk = dW.row(k);
    for (int j = 0; j < out; ++j) dwk[j] = 0.0;
    for (int i = 0; i < n; ++i) {
      const double xik = X.at(i, k);
      const double* dy = dY.row(i);
      for (int j = 0; j < out; ++j) dwk[j] += xik * dy[j];
    }
  }

  for (int j = 0; j < out; ++j) db[j] = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* dy = dY.row(i);
    for (int j = 0; j < out; ++j) db[j] += dy[j];
  }

  if (dX != nullptr) {
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < n; ++i) {
      const double* dy = dY.row(i);
      double* dx = dX->row(i);
      for (int k = 0; k < in; ++k) dx[k] = 0.0;
      for (int j = 0; j < out; ++j) {
        const double g = dy[j];
        for (int k = 0; k < in; ++k) dx[k] += g * W.at(k, j);
      }
    }
  }
}

void batchnorm_forward_train(const Matrix& X, std::span<const double> gamma,
                             std::span<const double> beta, double eps,
                             Matrix& Y, BatchNormCache& cache) {
  const int n = X.rows, f = X.cols;
  cache.mean.assign(f, 0.0);
  cache.var.assign(f, 0.0);
  cache.inv_std.assign(f, 0.0);
  cache.xhat = Matrix(n, f);
  const bool par = parallel_enabled();
#pragma omp parallel for schedule(static) if (par)
  for (int j = 0; j < f; ++j) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += X.at(i, j);
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = X.at(i, j) - mean;
      var += d * d;
    }
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    cache.mean[j] = mean;
    cache.var[j] = var;
    cache.inv_std[j] = inv;
    for (int i = 0; i < n; ++i) {
      const double xh = (X.at(i, j) - mean) * inv;
      cache.xhat.at(i, j) = xh;
      Y.at(i, j) = gamma[j] * xh + beta[j];
    }
  }
}

void batchnorm_forward_infer(const Matrix& X, std::span<const double> gamma,
                             std::span<const double> beta,
                             std::span<const double> running_mean,
                             std::span<const double> running_var, double eps,
                             Matrix& Y) {
  const int n = X.rows, f = X.cols;
  const bool par = parallel_enabled();
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < n; ++i) {
    const double* x = X.row(i);
    double* y = Y.row(i);
    for (int j = 0; j < f; ++j) {
      const double inv = 1.0 / std::sqrt(running_var[j] + eps);
      y[j] = gamma[j] * (x[j] - running_mean[j]) * inv + beta[j];
    }
  }
}

void batchnorm_backward(const Matrix& dY, const BatchNormCache& cache,
                        std::span<const double> gamma, Matrix& dX,
                        std::span<double> dgamma, std::span<double> dbeta) {
  const int n = dY.rows, f = dY.cols;
  const bool par = parallel_enabled();
#pragma omp parallel for schedule(static) if (par)
  for (int j = 0; j < f; ++j) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int i = 0; i < n; ++i) {
      const double dy = dY.at(i, j);
      sum_dy += dy;
      sum_dy_xhat += dy * cache.xhat.at(i, j);
    }
    dgamma[j] = sum_dy_xhat;
    dbeta[j] = sum_dy;
    const double scale = gamma[j] * cache.inv_std[j] / n;
    for (int i = 0; i < n; ++i) {
      dX.at(i, j) = scale * (n * dY.at(i, j) - sum_dy -
                             cache.xhat.at(i, j) * sum_dy_xhat);
    }
  }
}

ActivationProgram::ActivationProgram(const expr::ExprTree& tree,
                                     num::SafetyPolicy policy)
    : policy_(policy) {
  // Postorder flatten; register i is instruction i's output.
  struct Builder {
    std::vector<Instr>* code;
    int visit(const expr::ExprNode& n) {
      Instr ins;
      ins.kind = n.kind;
      ins.unary = n.unary;
      ins.binary = n.binary;
      if (n.kind == expr::ExprNode::Kind::kUnary) {
        ins.lhs = visit(n.children[0]);
      } else if (n.kind == expr::ExprNode::Kind::kBinary) {
        ins.lhs = visit(n.children[0]);
        ins.rhs = visit(n.children[1]);
      }
      code->push_back(ins);
      return static_cast<int>(code->size()) - 1;
    }
  };
  Builder b{&code_};
  b.visit(tree.root);
}

bool ActivationProgram::forward(std::span<const double> x, std::span<double> f,
                                std::span<double> fp) const {
  const std::size_t n = x.size();
  const int regs = static_cast<int>(code_.size());
  constexpr std::size_t kChunk = 512;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  const bool par = parallel_enabled();
  bool all_finite = true;

#pragma omp parallel for schedule(static) reduction(&& : all_finite) if (par)
  for (std::size_t c = 0; c < chunks; ++c) {
    static thread_local std::vector<double> scratch;
    const std::size_t lo = c * kChunk;
    const std::size_t hi = std::min(n, lo + kChunk);
    const std::size_t m = hi - lo;
    scratch.resize(static_cast<std::size_t>(regs) * kChunk * 2);
    double* v = scratch.data();
    double* d = scratch.data() + static_cast<std::size_t>(regs) * kChunk;

    for (int r = 0; r < regs; ++r) {
      const Instr& ins = code_[r];
      double* rv = v + static_cast<std::size_t>(r) * kChunk;
      double* rd = d + static_cast<std::size_t>(r) * kChunk;
      switch (ins.kind) {
        case expr::ExprNode::Kind::kLeaf:
          for (std::size_t i = 0; i < m; ++i) {
            rv[i] = x[lo + i];
            rd[i] = 1.0;
          }
          break;
        case expr::ExprNode::Kind::kUnary: {
          const double* cv = v + static_cast<std::size_t>(ins.lhs) * kChunk;
          const double* cd = d + static_cast<std::size_t>(ins.lhs) * kChunk;
          for (std::size_t i = 0; i < m; ++i) {
            const num::UnaryResult u = num::apply_unary(ins.unary, cv[i], policy_);
            rv[i] = u.value;
            rd[i] = u.deriv * cd[i];
          }
          break;
        }
        case expr::ExprNode::Kind::kBinary: {
          const double* av = v + static_cast<std::size_t>(ins.lhs) * kChunk;
          const double* ad = d + static_cast<std::size_t>(ins.lhs) * kChunk;
          const double* bv = v + static_cast<std::size_t>(ins.rhs) * kChunk;
          const double* bd = d + static_cast<std::size_t>(ins.rhs) * kChunk;
          for (std::size_t i = 0; i < m; ++i) {
            const num::BinaryResult r2 =
                num::apply_binary(ins.binary, av[i], bv[i], policy_);
            rv[i] = r2.value;
            rd[i] = r2.da * ad[i] + r2.db * bd[i];
          }
          break;
        }
      }
    }

    const double* outv = v + static_cast<std::size_t>(regs - 1) * kChunk;
    const double* outd = d + static_cast<std::size_t>(regs - 1) * kChunk;
    for (std::size_t i = 0; i < m; ++i) {
      double dv = outd[i];
      if (std::isfinite(dv) && std::fabs(dv) > policy_.deriv_cap)
        dv = std::copysign(policy_.deriv_cap, dv);
      f[lo + i] = outv[i];
      fp[lo + i] = dv;
      all_finite = all_finite && std::isfinite(outv[i]) && std::isfinite(dv);
    }
  }
  return all_finite;
}

void softmax_xent(const Matrix& logits, std::span<const int> labels,
                  std::span<double> per_row_loss, Matrix* dlogits,
                  int* correct) {
  const int n = logits.rows, k = logits.cols;
  const bool par = parallel_enabled();
  std::vector<int> hit(n, 0);
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < n; ++i) {
    const double* z = logits.row(i);
    int arg = 0;
    double zmax = z[0];
    for (int j = 1; j < k; ++j)
      if (z[j] > zmax) {
        zmax = z[j];
        arg = j;
      }
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(z[j] - zmax);
    const double log_sum = std::log(sum);
    per_row_loss[i] = log_sum - (z[labels[i]] - zmax);
    hit[i] = (arg == labels[i]) ? 1 : 0;
    if (dlogits != nullptr) {
      double* g = dlogits->row(i);
      for (int j = 0; j < k; ++j)
        g[j] = std::exp(z[j] - zmax) / sum / n;
      g[labels[i]] -= 1.0 / n;
    }
  }
  if (correct != nullptr) {
    int c = 0;
    for (int i = 0; i < n; ++i) c += hit[i];
    *correct = c;
  }
}

}  // namespace actevo::kernels
