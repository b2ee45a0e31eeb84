#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "actevo/errors.hpp"
#include "actevo/expr.hpp"
#include "actevo/rng.hpp"

using namespace actevo;
using expr::Alphabet;
using expr::BinaryOp;
using expr::ExprNode;
using expr::ExprTree;
using expr::UnaryOp;

namespace {

const Alphabet kStd{false};
const Alphabet kExt{true};

// Independent token counter: splits the printed string on non-identifier
// characters and tallies alphabet membership.
std::pair<int, int> count_tokens(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_') {
      cur += c;
    } else if (!cur.empty()) {
      words.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(cur);

  std::set<std::string> unary, binary;
  for (int i = 0; i < kExt.unary_count(); ++i)
    unary.insert(std::string(expr::token(static_cast<UnaryOp>(i))));
  for (int i = 0; i < expr::kBinaryCount; ++i)
    binary.insert(std::string(expr::token(static_cast<BinaryOp>(i))));

  int u = 0, b = 0;
  for (const std::string& w : words) {
    if (binary.count(w)) ++b;
    else if (unary.count(w)) ++u;
    else CHECK(w == "x");
  }
  return {b, u};
}

std::vector<std::string> op_tokens(const ExprNode& n) {
  std::vector<std::string> out;
  if (n.kind == ExprNode::Kind::kUnary)
    out.push_back(std::string(expr::token(n.unary)));
  if (n.kind == ExprNode::Kind::kBinary)
    out.push_back(std::string(expr::token(n.binary)));
  for (const ExprNode& c : n.children) {
    auto sub = op_tokens(c);
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

}  // namespace

TEST_CASE("alphabet sizes and distinct tokens") {
  CHECK(kStd.unary_count() == 24);
  CHECK(kExt.unary_count() == 25);
  CHECK(expr::kBinaryCount == 6);

  std::set<std::string> tokens;
  for (int i = 0; i < kExt.unary_count(); ++i)
    tokens.insert(std::string(expr::token(static_cast<UnaryOp>(i))));
  for (int i = 0; i < expr::kBinaryCount; ++i)
    tokens.insert(std::string(expr::token(static_cast<BinaryOp>(i))));
  CHECK(tokens.size() == 25 + 6);
  CHECK(tokens.count("atan") == 1);
}

TEST_CASE("parse builds the expected depth-1 tree") {
  const ExprTree t = expr::parse_tree("mul(tanh(x), nmin(x))", kStd);
  CHECK(t.root.kind == ExprNode::Kind::kBinary);
  CHECK(t.root.binary == BinaryOp::kMul);
  CHECK(t.root.children[0].unary == UnaryOp::kTanh);
  CHECK(t.root.children[1].unary == UnaryOp::kNmin);
  CHECK(t.root.children[0].children[0].kind == ExprNode::Kind::kLeaf);
  CHECK(expr::depth(t) == 1);
  CHECK(expr::node_count(t) == 5);
}

TEST_CASE("bare unary is a structure error") {
  CHECK_THROWS_AS(expr::parse_tree("relu(x)", kStd), StructureError);
  // The documented encoding of ReLU parses fine.
  CHECK(expr::depth(expr::parse_tree("max(relu(x), zero(x))", kStd)) == 1);
}

TEST_CASE("parse errors carry position and expectation") {
  try {
    expr::parse_tree("frobnicate(x)", kStd);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.position == 0);
    CHECK(e.expected == "binary operator");
  }
  try {
    expr::parse_tree("mul(tanh(x), nmin(x)", kStd);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.expected == ")");
  }
  CHECK_THROWS_AS(expr::parse_tree("mul(tanh(x), wibble(x))", kStd), ParseError);
  CHECK_THROWS_AS(expr::parse_tree("", kStd), ParseError);
  CHECK_THROWS_AS(expr::parse_tree("mul(tanh(x), nmin(x)) trailing", kStd),
                  ParseError);
}

TEST_CASE("atan needs the extended alphabet") {
  CHECK_THROWS_AS(expr::parse_tree("mul(atan(x), nmin(x))", kStd), ParseError);
  const ExprTree t = expr::parse_tree("mul(atan(x), nmin(x))", kExt);
  CHECK(expr::depth(t) == 1);
}

TEST_CASE("unbalanced trees are rejected") {
  CHECK_THROWS_AS(
      expr::parse_tree("add(id(mul(tanh(x), nmin(x))), zero(x))", kStd),
      StructureError);
}

TEST_CASE("print emits canonical text") {
  const ExprTree t = expr::parse_tree("mul( tanh( x ) ,  nmin(x) )", kStd);
  CHECK(expr::print_tree(t) == "mul(tanh(x), nmin(x))");
  const ExprTree swish = expr::parse_tree("mul(id(x), sigmoid(x))", kStd);
  CHECK(expr::print_tree(swish) == "mul(id(x), sigmoid(x))");
}

TEST_CASE("round trip over S_1 and random S_2") {
  for (const ExprTree& t : expr::enumerate_s1(kStd)) {
    CHECK(expr::parse_tree(expr::print_tree(t), kStd) == t);
  }
  Rng rng(123);
  for (int i = 0; i < 1000; ++i) {
    const ExprTree t = expr::sample_random(2, kExt, rng);
    CHECK(expr::parse_tree(expr::print_tree(t), kExt) == t);
    CHECK(expr::depth(t) == 2);
  }
}

TEST_CASE("depth-2 trees print 3 binary and 6 unary tokens") {
  Rng rng(99);
  for (int i = 0; i < 100; ++i) {
    const ExprTree t = expr::sample_random(2, kStd, rng);
    const auto [b, u] = count_tokens(expr::print_tree(t));
    CHECK(b == 3);
    CHECK(u == 6);
  }
}

TEST_CASE("nested core units have depth 2") {
  // core_unit(core_unit(x), core_unit(x))
  const ExprTree t = expr::parse_tree(
      "add(id(mul(tanh(x), nmin(x))), neg(max(relu(x), zero(x))))", kStd);
  CHECK(expr::depth(t) == 2);
  CHECK(expr::structural_height(t.root) == 4);
  CHECK(expr::node_count(t) == 13);
}

TEST_CASE("enumerate_s1 is complete, distinct and ordered") {
  const auto trees = expr::enumerate_s1(kStd);
  CHECK(trees.size() == 3456);

  std::set<std::string> ids;
  std::vector<std::string> printed;
  for (const ExprTree& t : trees) {
    printed.push_back(expr::canonical_id(t));
    ids.insert(printed.back());
  }
  CHECK(ids.size() == 3456);
  CHECK(std::is_sorted(printed.begin(), printed.end()));
  CHECK(ids.count("mul(tanh(x), nmin(x))") == 1);
  CHECK(ids.count("mul(nmin(x), erf(x))") == 1);

  const auto extended = expr::enumerate_s1(kExt);
  CHECK(extended.size() == 6 * 25 * 25);
  std::set<std::string> ext_ids;
  for (const ExprTree& t : extended) ext_ids.insert(expr::canonical_id(t));
  CHECK(ext_ids.count("mul(atan(x), nmin(x))") == 1);
}

TEST_CASE("count_space matches enumeration and direct arithmetic") {
  CHECK(expr::count_space(1, kStd) == "3456");
  CHECK(expr::count_space(2, kStd) == "41278242816");
  CHECK(expr::count_space(1, kExt) == "3750");

  // 3456^7 via native 128-bit arithmetic as an independent route.
  __int128 v = 1;
  for (int i = 0; i < 7; ++i) v *= 3456;
  std::string digits;
  while (v > 0) {
    digits.insert(digits.begin(), static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  CHECK(expr::count_space(3, kStd) == digits);
}

TEST_CASE("sample_random is deterministic and uniform per slot") {
  Rng a(7), b(7), c(8);
  const ExprTree ta = expr::sample_random(1, kStd, a);
  CHECK(ta == expr::sample_random(1, kStd, b));
  CHECK(expr::depth(expr::sample_random(2, kStd, c)) == 2);

  Rng rng(2024);
  std::map<BinaryOp, int> binary_counts;
  std::map<UnaryOp, int> unary_counts;
  const int kDraws = 10000;
  for (int i = 0; i < kDraws; ++i) {
    const ExprTree t = expr::sample_random(1, kStd, rng);
    ++binary_counts[t.root.binary];
    ++unary_counts[t.root.children[0].unary];
  }
  for (const auto& [op, n] : binary_counts)
    CHECK(std::abs(static_cast<double>(n) / kDraws - 1.0 / 6) < 0.02);
  CHECK(binary_counts.size() == 6);
  for (const auto& [op, n] : unary_counts)
    CHECK(std::abs(static_cast<double>(n) / kDraws - 1.0 / 24) < 0.02);
  CHECK(unary_counts.size() == 24);
}

TEST_CASE("mutate changes exactly one operator and keeps shape") {
  Rng rng(5);
  const ExprTree base = expr::parse_tree("mul(tanh(x), nmin(x))", kStd);
  for (int i = 0; i < 200; ++i) {
    const ExprTree m = expr::mutate(base, kStd, rng);
    CHECK(expr::depth(m) == 1);
    CHECK(expr::node_count(m) == expr::node_count(base));
    const auto a = op_tokens(base.root);
    const auto b = op_tokens(m.root);
    REQUIRE(a.size() == b.size());
    int diffs = 0;
    for (std::size_t k = 0; k < a.size(); ++k) diffs += a[k] != b[k];
    CHECK(diffs == 1);
    CHECK(expr::canonical_id(m) != expr::canonical_id(base));
  }
  // Input tree is untouched.
  CHECK(expr::print_tree(base) == "mul(tanh(x), nmin(x))");
}

TEST_CASE("mutate selects operator nodes uniformly") {
  Rng seed_rng(77);
  const ExprTree base = expr::sample_random(2, kStd, seed_rng);
  const auto base_tokens = op_tokens(base.root);
  REQUIRE(base_tokens.size() == 9);

  Rng rng(31337);
  std::vector<int> hits(9, 0);
  const int kDraws = 10000;
  for (int i = 0; i < kDraws; ++i) {
    const ExprTree m = expr::mutate(base, kStd, rng);
    const auto t = op_tokens(m.root);
    for (std::size_t k = 0; k < t.size(); ++k)
      if (t[k] != base_tokens[k]) ++hits[k];
  }
  for (int h : hits)
    CHECK(std::abs(static_cast<double>(h) / kDraws - 1.0 / 9) < 0.02);
}

TEST_CASE("operator replacement reproduces the published mutation example") {
  // (min{1, cosh(x)})^3 * sigmoid(e^x + arctan(x)), with the sigmoid node
  // mutated into abs.
  const std::string before =
      "mul(cube(min(one(x), cosh(x))), sigmoid(add(exp(x), atan(x))))";
  const std::string after =
      "mul(cube(min(one(x), cosh(x))), abs(add(exp(x), atan(x))))";
  const ExprTree t = expr::parse_tree(before, kExt);
  CHECK(expr::depth(t) == 2);
  // Preorder operator index of the sigmoid node.
  const ExprTree m = expr::replace_operator(t, 5, UnaryOp::kAbs);
  CHECK(expr::print_tree(m) == after);
}

TEST_CASE("crossover preserves depth and draws material from both parents") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const ExprTree a = expr::sample_random(2, kStd, rng);
    const ExprTree b = expr::sample_random(2, kStd, rng);
    const ExprTree child = expr::crossover(a, b, rng);
    CHECK(expr::depth(child) == 2);
    CHECK(expr::node_count(child) == expr::node_count(a));

    // Every operator of the child appears in one of the parents.
    std::multiset<std::string> pool;
    for (const auto& tok : op_tokens(a.root)) pool.insert(tok);
    for (const auto& tok : op_tokens(b.root)) pool.insert(tok);
    for (const auto& tok : op_tokens(child.root))
      CHECK(pool.count(tok) > 0);
  }
}

TEST_CASE("crossover of a tree with itself") {
  // With uniform donor choice among equal-height nodes, self-crossover can
  // move a subtree between sibling positions; structure (shape) is always
  // preserved, and content is preserved when same-height subtrees are
  // identical.
  Rng rng(3);
  const ExprTree uniform = expr::parse_tree("mul(tanh(x), tanh(x))", kStd);
  for (int i = 0; i < 50; ++i)
    CHECK(expr::crossover(uniform, uniform, rng) == uniform);

  for (int i = 0; i < 50; ++i) {
    const ExprTree t = expr::sample_random(2, kStd, rng);
    const ExprTree child = expr::crossover(t, t, rng);
    CHECK(expr::depth(child) == expr::depth(t));
    CHECK(expr::node_count(child) == expr::node_count(t));
  }
}

TEST_CASE("crossover depth mismatch raises") {
  Rng rng(9);
  const ExprTree a = expr::sample_random(1, kStd, rng);
  const ExprTree b = expr::sample_random(2, kStd, rng);
  CHECK_THROWS_AS(expr::crossover(a, b, rng), DepthMismatch);
}

TEST_CASE("crossover_at swaps the requested subtrees") {
  const ExprTree p1 = expr::parse_tree("mul(tanh(x), nmin(x))", kStd);
  const ExprTree p2 = expr::parse_tree("add(erf(x), sigmoid(x))", kStd);
  // Preorder over all nodes: 0=mul, 1=tanh, 2=leaf, 3=nmin, 4=leaf.
  const ExprTree child = expr::crossover_at(p1, 1, p2, 3);
  CHECK(expr::print_tree(child) == "mul(sigmoid(x), nmin(x))");
  CHECK_THROWS_AS(expr::crossover_at(p1, 0, p2, 1), DepthMismatch);
  // Parents untouched.
  CHECK(expr::print_tree(p1) == "mul(tanh(x), nmin(x))");
  CHECK(expr::print_tree(p2) == "add(erf(x), sigmoid(x))");
}

TEST_CASE("canonical ids are syntactic") {
  const ExprTree a = expr::parse_tree("add(tanh(x), nmin(x))", kStd);
  const ExprTree b = expr::parse_tree("add(nmin(x), tanh(x))", kStd);
  CHECK(expr::canonical_id(a) != expr::canonical_id(b));
  const ExprTree a2 = expr::parse_tree("add(tanh(x), nmin(x))", kStd);
  CHECK(expr::canonical_id(a) == expr::canonical_id(a2));
}

TEST_CASE("rng streams are reproducible") {
  Rng a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    all_equal = all_equal && va == b.next_u64();
    any_diff = any_diff || va != c.next_u64();
  }
  CHECK(all_equal);
  CHECK(any_diff);

  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
  CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
}
