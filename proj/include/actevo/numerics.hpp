#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "actevo/expr.hpp"

namespace actevo::num {

// Guards applied during tree evaluation. epsilon is the grammar's ε used by
// logeps and diveps; exp_clamp bounds exponent arguments; deriv_cap bounds
// derivative magnitudes; atanh inputs are clamped into
// [-1 + atanh_margin, 1 - atanh_margin].
struct SafetyPolicy {
  double epsilon = 1e-7;
  double exp_clamp = 60.0;
  double deriv_cap = 1e6;
  double atanh_margin = 1e-7;

  void validate() const;
};

struct EvalReport {
  std::vector<double> values;
  bool finite = true;               // true iff every entry is finite
  double saturated_fraction = 0.0;  // inputs where at least one clamp fired
};

// Scalar operator semantics, shared by the reference evaluator and the
// batched kernels so the two routes are bit-identical.
struct UnaryResult {
  double value;
  double deriv;    // d(op)/d(arg) at the (possibly clamped) point
  bool clamped;
};

struct BinaryResult {
  double value;
  double da;
  double db;
  bool clamped;
};

UnaryResult apply_unary(expr::UnaryOp op, double x, const SafetyPolicy& policy);
BinaryResult apply_binary(expr::BinaryOp op, double a, double b,
                          const SafetyPolicy& policy);

// Single-point evaluation with forward-mode derivative.
struct Dual {
  double value;
  double deriv;
};

Dual eval_dual(const expr::ExprNode& node, double x, const SafetyPolicy& policy,
               bool& clamped);
double eval_value(const expr::ExprNode& node, double x,
                  const SafetyPolicy& policy, bool& clamped);

// Elementwise evaluation of the tree. Non-finite outputs are reported via
// the finite flag, never masked.
EvalReport eval(const expr::ExprTree& tree, std::span<const double> inputs,
                const SafetyPolicy& policy);

// Elementwise d(tree)/dx via the chain rule over analytic per-operator
// derivatives. Finite magnitudes above deriv_cap are clamped; non-finite
// values propagate and surface through the finite flag.
EvalReport deriv(const expr::ExprTree& tree, std::span<const double> inputs,
                 const SafetyPolicy& policy);

// Max over points of |analytic - central difference| / max(|analytic|, 1e-8).
// Throws BadPoint when a point is within 10*h of a non-smooth locus of any
// operator in the tree (kinks of abs/relu/nmin/sqrt, max/min ties, the
// logeps/diveps singularities, the atanh clamp boundary, exponent clamps).
double grad_check(const expr::ExprTree& tree, std::span<const double> points,
                  double h, const SafetyPolicy& policy);

// True when every operator argument at x stays at least `margin` away from
// that operator's non-smooth loci. grad_check's precondition.
bool is_admissible_point(const expr::ExprTree& tree, double x, double margin,
                         const SafetyPolicy& policy, std::string* why = nullptr);

}  // namespace actevo::num
