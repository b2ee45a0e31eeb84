#include "actevo/presets.hpp"

#include <array>

#include "actevo/errors.hpp"

namespace actevo::presets {

namespace {

// Grammar building blocks for the published winners. Formulas printed with
// unary chains (e.g. arctan(x^3), min{q, 0}) are encoded as balanced trees
// using the constant operators as padding, which preserves the function
// values exactly.
//
//   A  = min{erf(x), 0}             B  = max{x, 0}
//   C3 = x^3                        AB = max{|x|, 0}
//   Q  = arctan(x^3) * max{|x|, 0}  R  = min{Q, 0}

constexpr const char* kA = "min(erf(x), zero(x))";
constexpr const char* kB = "max(id(x), zero(x))";
constexpr const char* kC3 = "mul(cube(x), one(x))";
constexpr const char* kAB = "max(abs(x), zero(x))";

const std::string kQ =
    std::string("mul(atan(") + kC3 + "), id(" + kAB + "))";
const std::string kR = "min(id(" + kQ + "), zero(" + kQ + "))";

const std::string kSub =
    std::string("sub(id(") + kA + "), id(" + kB + "))";
const std::string kEvoLoss1 =
    "mul(exp(add(id(" + kSub + "), zero(" + kSub + "))), id(" + kR + "))";

const std::string kMax2 =
    std::string("max(id(") + kA + "), id(" + kB + "))";
const std::string kEvoLoss2 =
    "mul(exp(add(id(" + kMax2 + "), zero(" + kMax2 + "))), id(" + kR + "))";

const std::string kG1 =
    std::string("mul(atan(") + kC3 + "), cos(max(one(x), zero(x))))";
const std::string kG2 =
    std::string("mul(atan(min(id(x), zero(x))), id(") + kAB + "))";
const std::string kEvoLoss3 = "mul(neg(" + kG1 + "), neg(" + kG2 + "))";

const std::array<Preset, 9> kRegistry = {{
    {"relu", "max(x, 0)", "max(relu(x), zero(x))", false},
    {"swish", "x * sigmoid(x)", "mul(id(x), sigmoid(x))", false},
    {"tanh_min", "tanh(x) * min(x, 0)", "mul(tanh(x), nmin(x))", false},
    {"atan_min", "arctan(x) * min(x, 0)", "mul(atan(x), nmin(x))", true},
    {"min_erf", "min(x, 0) * erf(x)", "mul(nmin(x), erf(x))", false},
    {"sigmoid_erf", "sigmoid(x) * erf(x)", "mul(sigmoid(x), erf(x))", false},
    {"evo_loss_1",
     "exp(min(erf(x), 0) - max(x, 0)) * min(arctan(x^3) * max(|x|, 0), 0)",
     kEvoLoss1.c_str(), true},
    {"evo_loss_2",
     "exp(max(min(erf(x), 0), max(x, 0))) * min(arctan(x^3) * max(|x|, 0), 0)",
     kEvoLoss2.c_str(), true},
    {"evo_loss_3",
     "(-(arctan(x^3) * cos(1))) * (-(arctan(min(x, 0)) * max(|x|, 0)))",
     kEvoLoss3.c_str(), true},
}};

}  // namespace

std::span<const Preset> registry() { return kRegistry; }

const Preset* find(std::string_view name) {
  for (const Preset& p : kRegistry)
    if (p.name == name) return &p;
  return nullptr;
}

expr::ExprTree resolve(const std::string& text, const expr::Alphabet& alphabet) {
  if (const Preset* p = find(text)) {
    if (p->requires_extended && !alphabet.extended)
      throw ParseError("preset '" + text + "' uses arctan and needs the "
                       "extended alphabet (pass --extended-alphabet)",
                       0, "extended alphabet");
    return expr::parse_tree(p->grammar, expr::Alphabet{true});
  }
  return expr::parse_tree(text, alphabet);
}

}  // namespace actevo::presets
