#include "actevo/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "actevo/errors.hpp"

namespace actevo::num {

using expr::BinaryOp;
using expr::ExprNode;
using expr::ExprTree;
using expr::UnaryOp;

void SafetyPolicy::validate() const {
  if (!(epsilon > 0) || !(exp_clamp > 0) || !(deriv_cap > 0) ||
      !(atanh_margin > 0) || !(atanh_margin < 1))
    throw ConfigError("safety policy fields must be strictly positive "
                      "(atanh_margin < 1)");
}

namespace {

constexpr double kTwoOverSqrtPi = 1.1283791670955126;

inline double cap_magnitude(double d, double cap, bool& clamped) {
  if (std::isfinite(d) && std::fabs(d) > cap) {
    clamped = true;
    return std::copysign(cap, d);
  }
  return d;
}

}  // namespace

UnaryResult apply_unary(UnaryOp op, double x, const SafetyPolicy& P) {
  if (std::isnan(x)) return {x, x, false};
  UnaryResult r{0.0, 0.0, false};
  switch (op) {
    case UnaryOp::kZero:
      r = {0.0, 0.0, false};
      break;
    case UnaryOp::kOne:
      r = {1.0, 0.0, false};
      break;
    case UnaryOp::kId:
      r = {x, 1.0, false};
      break;
    case UnaryOp::kNeg:
      r = {-x, -1.0, false};
      break;
    case UnaryOp::kAbs:
      r = {std::fabs(x), x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0), false};
      break;
    case UnaryOp::kSquare:
      r = {x * x, 2.0 * x, false};
      break;
    case UnaryOp::kCube:
      r = {x * x * x, 3.0 * x * x, false};
      break;
    case UnaryOp::kSqrt:
      // sqrt(max(x, 0)); zero slope on the guarded side.
      if (x > 0) {
        const double s = std::sqrt(x);
        r = {s, 0.5 / s, false};
      } else {
        r = {0.0, 0.0, x < 0};
      }
      break;
    case UnaryOp::kExp:
      if (x > P.exp_clamp) {
        r = {std::exp(P.exp_clamp), 0.0, true};
      } else {
        const double e = std::exp(x);
        r = {e, e, false};
      }
      break;
    case UnaryOp::kGauss: {
      const double x2 = x * x;
      if (x2 > 1600.0) {
        r = {0.0, 0.0, false};  // underflows to zero well before this
      } else {
        const double g = std::exp(-x2);
        r = {g, -2.0 * x * g, false};
      }
      break;
    }
    case UnaryOp::kSoftplus: {
      // Overflow-stable: max(x,0) + log1p(exp(-|x|)).
      const double v = std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
      const double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                              : std::exp(x) / (1.0 + std::exp(x));
      r = {v, s, false};
      break;
    }
    case UnaryOp::kLogEps: {
      // Singular at x = -epsilon; the search layer treats the resulting
      // non-finite values as data.
      const double t = x + P.epsilon;
      r = {std::log(std::fabs(t)), 1.0 / t, false};
      break;
    }
    case UnaryOp::kSin:
      r = {std::sin(x), std::cos(x), false};
      break;
    case UnaryOp::kSinh: {
      const bool out = std::fabs(x) > P.exp_clamp;
      const double z = std::clamp(x, -P.exp_clamp, P.exp_clamp);
      r = {std::sinh(z), out ? 0.0 : std::cosh(z), out};
      break;
    }
    case UnaryOp::kAsinh:
      r = {std::asinh(x), 1.0 / std::sqrt(x * x + 1.0), false};
      break;
    case UnaryOp::kCos:
      r = {std::cos(x), -std::sin(x), false};
      break;
    case UnaryOp::kCosh: {
      const bool out = std::fabs(x) > P.exp_clamp;
      const double z = std::clamp(x, -P.exp_clamp, P.exp_clamp);
      r = {std::cosh(z), out ? 0.0 : std::sinh(z), out};
      break;
    }
    case UnaryOp::kTanh: {
      const double t = std::tanh(x);
      r = {t, 1.0 - t * t, false};
      break;
    }
    case UnaryOp::kAtanh: {
      const double lim = 1.0 - P.atanh_margin;
      const bool out = x < -lim || x > lim;
      const double z = std::clamp(x, -lim, lim);
      r = {std::atanh(z), 1.0 / (1.0 - z * z), out};
      break;
    }
    case UnaryOp::kRelu:
      r = {x > 0 ? x : 0.0, x > 0 ? 1.0 : 0.0, false};
      break;
    case UnaryOp::kNmin:
      // min(x, 0); slope convention at the kink is 1.
      r = {x < 0 ? x : 0.0, x <= 0 ? 1.0 : 0.0, false};
      break;
    case UnaryOp::kSigmoid: {
      double s;
      if (x >= 0) {
        s = 1.0 / (1.0 + std::exp(-x));
      } else {
        const double e = std::exp(x);
        s = e / (1.0 + e);
      }
      r = {s, s * (1.0 - s), false};
      break;
    }
    case UnaryOp::kErf:
      r = {std::erf(x), kTwoOverSqrtPi * std::exp(-x * x), false};
      break;
    case UnaryOp::kSinc:
      if (std::fabs(x) < 1e-4) {
        const double x2 = x * x;
        r = {1.0 - x2 / 6.0 + x2 * x2 / 120.0, -x / 3.0 + x * x2 / 30.0, false};
      } else {
        const double s = std::sin(x);
        r = {s / x, (x * std::cos(x) - s) / (x * x), false};
      }
      break;
    case UnaryOp::kAtan:
      r = {std::atan(x), 1.0 / (1.0 + x * x), false};
      break;
  }
  r.deriv = cap_magnitude(r.deriv, P.deriv_cap, r.clamped);
  return r;
}

BinaryResult apply_binary(BinaryOp op, double a, double b,
                          const SafetyPolicy& P) {
  if (std::isnan(a) || std::isnan(b)) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan, false};
  }
  BinaryResult r{0.0, 0.0, 0.0, false};
  switch (op) {
    case BinaryOp::kAdd:
      r = {a + b, 1.0, 1.0, false};
      break;
    case BinaryOp::kSub:
      r = {a - b, 1.0, -1.0, false};
      break;
    case BinaryOp::kMul:
      r = {a * b, b, a, false};
      break;
    case BinaryOp::kDivEps: {
      // a / (b + epsilon), singular at b = -epsilon.
      const double t = b + P.epsilon;
      r = {a / t, 1.0 / t, -a / (t * t), false};
      break;
    }
    case BinaryOp::kMax:
      // Ties go to the first argument.
      r = a >= b ? BinaryResult{a, 1.0, 0.0, false}
                 : BinaryResult{b, 0.0, 1.0, false};
      break;
    case BinaryOp::kMin:
      r = a <= b ? BinaryResult{a, 1.0, 0.0, false}
                 : BinaryResult{b, 0.0, 1.0, false};
      break;
  }
  r.da = cap_magnitude(r.da, P.deriv_cap, r.clamped);
  r.db = cap_magnitude(r.db, P.deriv_cap, r.clamped);
  return r;
}

Dual eval_dual(const ExprNode& node, double x, const SafetyPolicy& policy,
               bool& clamped) {
  switch (node.kind) {
    case ExprNode::Kind::kLeaf:
      return {x, 1.0};
    case ExprNode::Kind::kUnary: {
      const Dual c = eval_dual(node.children[0], x, policy, clamped);
      const UnaryResult r = apply_unary(node.unary, c.value, policy);
      clamped |= r.clamped;
      return {r.value, r.deriv * c.deriv};
    }
    case ExprNode::Kind::kBinary: {
      const Dual ca = eval_dual(node.children[0], x, policy, clamped);
      const Dual cb = eval_dual(node.children[1], x, policy, clamped);
      const BinaryResult r = apply_binary(node.binary, ca.value, cb.value, policy);
      clamped |= r.clamped;
      return {r.value, r.da * ca.deriv + r.db * cb.deriv};
    }
  }
  return {0.0, 0.0};
}

double eval_value(const ExprNode& node, double x, const SafetyPolicy& policy,
                  bool& clamped) {
  switch (node.kind) {
    case ExprNode::Kind::kLeaf:
      return x;
    case ExprNode::Kind::kUnary: {
      const double c = eval_value(node.children[0], x, policy, clamped);
      const UnaryResult r = apply_unary(node.unary, c, policy);
      clamped |= r.clamped;
      return r.value;
    }
    case ExprNode::Kind::kBinary: {
      const double a = eval_value(node.children[0], x, policy, clamped);
      const double b = eval_value(node.children[1], x, policy, clamped);
      const BinaryResult r = apply_binary(node.binary, a, b, policy);
      clamped |= r.clamped;
      return r.value;
    }
  }
  return 0.0;
}

EvalReport eval(const ExprTree& tree, std::span<const double> inputs,
                const SafetyPolicy& policy) {
  EvalReport report;
  report.values.reserve(inputs.size());
  std::size_t saturated = 0;
  for (double x : inputs) {
    bool clamped = false;
    const double v = eval_value(tree.root, x, policy, clamped);
    report.values.push_back(v);
    report.finite = report.finite && std::isfinite(v);
    if (clamped) ++saturated;
  }
  report.saturated_fraction =
      inputs.empty() ? 0.0 : static_cast<double>(saturated) / inputs.size();
  return report;
}

EvalReport deriv(const ExprTree& tree, std::span<const double> inputs,
                 const SafetyPolicy& policy) {
  EvalReport report;
  report.values.reserve(inputs.size());
  std::size_t saturated = 0;
  for (double x : inputs) {
    bool clamped = false;
    Dual d = eval_dual(tree.root, x, policy, clamped);
    if (std::isfinite(d.deriv) && std::fabs(d.deriv) > policy.deriv_cap) {
      d.deriv = std::copysign(policy.deriv_cap, d.deriv);
      clamped = true;
    }
    report.values.push_back(d.deriv);
    report.finite = report.finite && std::isfinite(d.deriv);
    if (clamped) ++saturated;
  }
  report.saturated_fraction =
      inputs.empty() ? 0.0 : static_cast<double>(saturated) / inputs.size();
  return report;
}

namespace {

// Walks the tree at input x and records the first operator whose argument
// sits within `margin` of one of its non-smooth loci.
double admissibility_walk(const ExprNode& node, double x, double margin,
                          const SafetyPolicy& P, std::string* why, bool& bad) {
  switch (node.kind) {
    case ExprNode::Kind::kLeaf:
      return x;
    case ExprNode::Kind::kUnary: {
      const double c =
          admissibility_walk(node.children[0], x, margin, P, why, bad);
      if (!bad) {
        bool near = false;
        switch (node.unary) {
          case UnaryOp::kAbs:
          case UnaryOp::kRelu:
          case UnaryOp::kNmin:
          case UnaryOp::kSqrt:
            near = std::fabs(c) < margin;
            break;
          case UnaryOp::kLogEps:
            near = std::fabs(c + P.epsilon) < margin;
            break;
          case UnaryOp::kAtanh:
            near = std::fabs(c) >= 1.0 - P.atanh_margin - margin;
            break;
          case UnaryOp::kExp:
            near = c >= P.exp_clamp - margin;
            break;
          case UnaryOp::kSinh:
          case UnaryOp::kCosh:
            near = std::fabs(c) >= P.exp_clamp - margin;
            break;
          default:
            break;
        }
        if (near) {
          bad = true;
          if (why)
            *why = std::string(expr::token(node.unary)) +
                   " argument near a non-smooth locus";
        }
      }
      return apply_unary(node.unary, c, P).value;
    }
    case ExprNode::Kind::kBinary: {
      const double a =
          admissibility_walk(node.children[0], x, margin, P, why, bad);
      const double b =
          admissibility_walk(node.children[1], x, margin, P, why, bad);
      if (!bad) {
        bool near = false;
        switch (node.binary) {
          case BinaryOp::kDivEps:
            near = std::fabs(b + P.epsilon) < margin;
            break;
          case BinaryOp::kMax:
          case BinaryOp::kMin:
            near = std::fabs(a - b) < margin;
            break;
          default:
            break;
        }
        if (near) {
          bad = true;
          if (why)
            *why = std::string(expr::token(node.binary)) +
                   " arguments near a non-smooth locus";
        }
      }
      return apply_binary(node.binary, a, b, P).value;
    }
  }
  return 0.0;
}

}  // namespace

bool is_admissible_point(const ExprTree& tree, double x, double margin,
                         const SafetyPolicy& policy, std::string* why) {
  bool bad = false;
  admissibility_walk(tree.root, x, margin, policy, why, bad);
  return !bad;
}

double grad_check(const ExprTree& tree, std::span<const double> points,
                  double h, const SafetyPolicy& policy) {
  double max_rel = 0.0;
  for (double x : points) {
    std::string why;
    if (!is_admissible_point(tree, x, 10.0 * h, policy, &why))
      throw BadPoint("grad_check point " + std::to_string(x) + ": " + why);
    bool clamped = false;
    const double analytic = eval_dual(tree.root, x, policy, clamped).deriv;
    const double fp = eval_value(tree.root, x + h, policy, clamped);
    const double fm = eval_value(tree.root, x - h, policy, clamped);
    const double numeric = (fp - fm) / (2.0 * h);
    const double rel =
        std::fabs(analytic - numeric) / std::max(std::fabs(analytic), 1e-8);
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace actevo::num
