// Benchmarks the serial reference kernels against the OpenMP backend, plus
// one end-to-end generation evaluation. The two backends must agree bit for
// bit (the unit tests enforce it); this target reports the speedups.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "actevo/data.hpp"
#include "actevo/expr.hpp"
#include "actevo/kernels.hpp"
#include "actevo/nn.hpp"
#include "actevo/numerics.hpp"
#include "actevo/rng.hpp"
#include "actevo/search.hpp"

using namespace actevo;

namespace {

double time_of(const std::function<void()>& fn, int repeats) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
             .count() /
         repeats;
}

void row(const char* name, double serial, double parallel) {
  std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, serial * 1e3,
              parallel * 1e3, serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  int repeats = 5;
  if (argc > 1) repeats = std::max(1, std::atoi(argv[1]));

#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; both columns are serial\n");
#endif
  std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

  Rng rng(7);
  const num::SafetyPolicy policy;
  const expr::Alphabet alphabet;

  // Activation program on a large vector, a depth-2 tree.
  {
    const expr::ExprTree tree = expr::sample_random(2, alphabet, rng);
    const kernels::ActivationProgram program(tree, policy);
    std::vector<double> x(1 << 20), f(x.size()), fp(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = -4.0 + 8.0 * i / x.size();
    auto runit = [&] { program.forward(x, f, fp); };
    kernels::set_backend(kernels::Backend::kSerial);
    const double s = time_of(runit, repeats);
    kernels::set_backend(kernels::Backend::kParallel);
    const double p = time_of(runit, repeats);
    row("activation 1M elements", s, p);
  }

  // Dense layer at training shapes.
  {
    kernels::Matrix X(512, 256), W(256, 256), Y(512, 256), dY(512, 256);
    kernels::Matrix dX(512, 256), dW(256, 256);
    std::vector<double> b(256, 0.1), db(256);
    for (double& v : X.data) v = rng.uniform() - 0.5;
    for (double& v : W.data) v = rng.uniform() - 0.5;
    for (double& v : dY.data) v = rng.uniform() - 0.5;
    auto fwd = [&] { kernels::dense_forward(X, W, b, Y); };
    auto bwd = [&] { kernels::dense_backward(X, W, dY, &dX, dW, db); };
    kernels::set_backend(kernels::Backend::kSerial);
    const double fs = time_of(fwd, repeats), bs = time_of(bwd, repeats);
    kernels::set_backend(kernels::Backend::kParallel);
    const double fpp = time_of(fwd, repeats), bp = time_of(bwd, repeats);
    row("dense forward 512x256x256", fs, fpp);
    row("dense backward 512x256x256", bs, bp);
  }

  // Batch norm.
  {
    kernels::Matrix X(512, 256), Y(512, 256), dY(512, 256), dX(512, 256);
    std::vector<double> gamma(256, 1.0), beta(256, 0.0), dg(256), dbta(256);
    for (double& v : X.data) v = rng.gaussian();
    for (double& v : dY.data) v = rng.uniform() - 0.5;
    kernels::BatchNormCache cache;
    auto fwd = [&] {
      kernels::batchnorm_forward_train(X, gamma, beta, 1e-5, Y, cache);
    };
    kernels::set_backend(kernels::Backend::kSerial);
    const double fs = time_of(fwd, repeats);
    kernels::set_backend(kernels::Backend::kParallel);
    const double fpp = time_of(fwd, repeats);
    auto bwd = [&] {
      kernels::batchnorm_backward(dY, cache, gamma, dX, dg, dbta);
    };
    kernels::set_backend(kernels::Backend::kSerial);
    const double bs = time_of(bwd, repeats);
    kernels::set_backend(kernels::Backend::kParallel);
    const double bp = time_of(bwd, repeats);
    row("batchnorm fwd 512x256", fs, fpp);
    row("batchnorm bwd 512x256", bs, bp);
  }

  // One short training, kernel-level parallelism only.
  {
    search::SearchConfig cfg;
    cfg.train.epochs = 3;
    const data::Dataset ds = search::build_dataset(cfg);
    const expr::ExprTree tree =
        expr::parse_tree("mul(tanh(x), nmin(x))", alphabet);
    auto runit = [&] {
      search::evaluate_candidate(tree, 42, ds, cfg);
    };
    kernels::set_backend(kernels::Backend::kSerial);
    const double s = time_of(runit, 1);
    kernels::set_backend(kernels::Backend::kParallel);
    const double p = time_of(runit, 1);
    row("training 3 epochs (kernels)", s, p);
  }

  // Candidate-level parallelism over one generation.
  {
    kernels::set_backend(kernels::Backend::kSerial);
    search::SearchConfig cfg;
    cfg.population = 8;
    cfg.elite = 1;
    cfg.random_inject = 2;
    cfg.offspring = 5;
    cfg.generations = 1;
    cfg.train.epochs = 3;
    auto runit = [&](int jobs) {
      return [&, jobs] { search::run_search(cfg, jobs); };
    };
    const double s = time_of(runit(1), 1);
#ifdef _OPENMP
    const int jobs = omp_get_max_threads();
#else
    const int jobs = 1;
#endif
    const double p = time_of(runit(jobs), 1);
    row("generation of 8 candidates", s, p);
    kernels::set_backend(kernels::Backend::kParallel);
  }

  return 0;
}
