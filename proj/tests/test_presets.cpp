#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "actevo/errors.hpp"
#include "actevo/numerics.hpp"
#include "actevo/presets.hpp"

using namespace actevo;
using expr::Alphabet;
using expr::ExprTree;

namespace {

const Alphabet kStd{false};
const Alphabet kExt{true};
const num::SafetyPolicy kPolicy;

// Closed-form references, written directly from the published formulas.
double relu_ref(double x) { return std::max(x, 0.0); }
double swish_ref(double x) { return x / (1.0 + std::exp(-x)); }
double tanh_min_ref(double x) { return std::tanh(x) * std::min(x, 0.0); }
double atan_min_ref(double x) { return std::atan(x) * std::min(x, 0.0); }
double min_erf_ref(double x) { return std::min(x, 0.0) * std::erf(x); }
double sigmoid_erf_ref(double x) {
  return 1.0 / (1.0 + std::exp(-x)) * std::erf(x);
}
double evo_loss_1_ref(double x) {
  const double left = std::exp(std::min(std::erf(x), 0.0) - std::max(x, 0.0));
  const double right =
      std::min(std::atan(x * x * x) * std::max(std::fabs(x), 0.0), 0.0);
  return left * right;
}
double evo_loss_2_ref(double x) {
  const double left =
      std::exp(std::max(std::min(std::erf(x), 0.0), std::max(x, 0.0)));
  const double right =
      std::min(std::atan(x * x * x) * std::max(std::fabs(x), 0.0), 0.0);
  return left * right;
}
double evo_loss_3_ref(double x) {
  const double left = -(std::atan(x * x * x) * std::cos(1.0));
  const double right =
      -(std::atan(std::min(x, 0.0)) * std::max(std::fabs(x), 0.0));
  return left * right;
}

void check_matches(const char* name, double (*ref)(double)) {
  const ExprTree tree = presets::resolve(name, kExt);
  std::vector<double> xs;
  for (int i = 0; i <= 100; ++i) xs.push_back(-5.0 + 0.1 * i);
  const auto report = num::eval(tree, xs, kPolicy);
  REQUIRE(report.finite);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    INFO(name << " at x=" << xs[i]);
    CHECK(report.values[i] == doctest::Approx(ref(xs[i])).epsilon(1e-12));
  }
}

}  // namespace

TEST_CASE("every preset parses, is balanced, and round-trips") {
  for (const presets::Preset& p : presets::registry()) {
    const ExprTree t = presets::resolve(std::string(p.name), kExt);
    CHECK(expr::depth(t) >= 1);
    CHECK(expr::parse_tree(expr::print_tree(t), kExt) == t);
  }
}

TEST_CASE("preset depths") {
  CHECK(expr::depth(presets::resolve("relu", kStd)) == 1);
  CHECK(expr::depth(presets::resolve("swish", kStd)) == 1);
  CHECK(expr::depth(presets::resolve("tanh_min", kStd)) == 1);
  CHECK(expr::depth(presets::resolve("atan_min", kExt)) == 1);
  CHECK(expr::depth(presets::resolve("min_erf", kStd)) == 1);
  CHECK(expr::depth(presets::resolve("sigmoid_erf", kStd)) == 1);
  CHECK(expr::depth(presets::resolve("evo_loss_1", kExt)) == 4);
  CHECK(expr::depth(presets::resolve("evo_loss_2", kExt)) == 4);
  CHECK(expr::depth(presets::resolve("evo_loss_3", kExt)) == 3);
}

TEST_CASE("presets match their closed forms on the plot domain") {
  check_matches("relu", relu_ref);
  check_matches("swish", swish_ref);
  check_matches("tanh_min", tanh_min_ref);
  check_matches("atan_min", atan_min_ref);
  check_matches("min_erf", min_erf_ref);
  check_matches("sigmoid_erf", sigmoid_erf_ref);
  check_matches("evo_loss_1", evo_loss_1_ref);
  check_matches("evo_loss_2", evo_loss_2_ref);
  check_matches("evo_loss_3", evo_loss_3_ref);
}

TEST_CASE("arctan presets need the extended alphabet") {
  CHECK_THROWS_AS(presets::resolve("atan_min", kStd), ParseError);
  CHECK_THROWS_AS(presets::resolve("evo_loss_1", kStd), ParseError);
  CHECK_NOTHROW(presets::resolve("tanh_min", kStd));
}

TEST_CASE("non-preset text falls through to the grammar") {
  const ExprTree t = presets::resolve("mul(tanh(x), nmin(x))", kStd);
  CHECK(expr::print_tree(t) == "mul(tanh(x), nmin(x))");
  CHECK_THROWS_AS(presets::resolve("not_a_preset", kStd), ParseError);
}

TEST_CASE("swish preset equals the S_1 member from the grammar") {
  const ExprTree a = presets::resolve("swish", kStd);
  const ExprTree b = expr::parse_tree("mul(id(x), sigmoid(x))", kStd);
  CHECK(a == b);
}
