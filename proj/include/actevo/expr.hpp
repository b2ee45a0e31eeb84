#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "actevo/rng.hpp"

namespace actevo::expr {

// Unary operator alphabet. `kAtan` is the optional 25th member, enabled by
// the extended alphabet only; with it disabled the alphabet is exactly the
// 24 members below it.
enum class UnaryOp : std::uint8_t {
  kZero, kOne, kId, kNeg, kAbs, kSquare, kCube, kSqrt, kExp, kGauss,
  kSoftplus, kLogEps, kSin, kSinh, kAsinh, kCos, kCosh, kTanh, kAtanh,
  kRelu, kNmin, kSigmoid, kErf, kSinc,
  kAtan,
};

enum class BinaryOp : std::uint8_t { kAdd, kSub, kMul, kDivEps, kMax, kMin };

inline constexpr int kStandardUnaryCount = 24;
inline constexpr int kExtendedUnaryCount = 25;
inline constexpr int kBinaryCount = 6;

std::string_view token(UnaryOp op);
std::string_view token(BinaryOp op);

// Which unary alphabet is in effect. The flag travels with every search
// config and output record.
struct Alphabet {
  bool extended = false;

  int unary_count() const { return extended ? kExtendedUnaryCount : kStandardUnaryCount; }
  bool contains(UnaryOp op) const {
    return static_cast<int>(op) < unary_count();
  }
  // Alphabet members sorted by canonical token text.
  std::vector<UnaryOp> sorted_unaries() const;
  static std::vector<BinaryOp> sorted_binaries();
};

// A balanced core-unit tree. Shape alternates Binary -> Unary -> (Leaf |
// Binary); both argument branches of a binary node always carry the same
// core-unit depth, so a tree of depth d is the full tree with 2^d - 1
// binary nodes, 2(2^d - 1) unary nodes and 2^d leaves.
struct ExprNode {
  enum class Kind : std::uint8_t { kLeaf, kUnary, kBinary };

  Kind kind = Kind::kLeaf;
  UnaryOp unary = UnaryOp::kZero;
  BinaryOp binary = BinaryOp::kAdd;
  std::vector<ExprNode> children;

  bool operator==(const ExprNode& other) const = default;

  static ExprNode leaf() { return ExprNode{}; }
  static ExprNode make_unary(UnaryOp op, ExprNode child);
  static ExprNode make_binary(BinaryOp op, ExprNode lhs, ExprNode rhs);
};

struct ExprTree {
  ExprNode root;

  bool operator==(const ExprTree& other) const = default;
};

// Leaf = 0, unary = child + 1, binary = child + 1. In a balanced tree the
// height of a node determines its role: even and positive = binary, odd =
// unary, zero = leaf.
int structural_height(const ExprNode& node);

// Core-unit depth; a single core unit has depth 1.
int depth(const ExprTree& tree);

// Total node count including leaves.
int node_count(const ExprTree& tree);

// Canonical text form, e.g. "mul(tanh(x), nmin(x))".
std::string print_tree(const ExprTree& tree);

// Deduplication and cache key. Identical to print_tree: syntactic identity,
// no algebraic normalisation.
std::string canonical_id(const ExprTree& tree);

// Parses canonical grammar text. Whitespace between tokens is accepted; the
// canonical form is what print_tree emits. Throws ParseError for malformed
// text and StructureError when the parsed tree is not a balanced core-unit
// tree (including a bare unary such as "relu(x)").
ExprTree parse_tree(std::string_view text, const Alphabet& alphabet);

// All depth-1 trees in lexicographic token order (binary, unary1, unary2).
std::vector<ExprTree> enumerate_s1(const Alphabet& alphabet);

// Decimal digits of |S_d| = B^(2^d - 1) where B is the number of distinct
// core units. Exact arbitrary-precision result.
std::string count_space(int d, const Alphabet& alphabet);

// Uniform member of S_d: every operator slot drawn independently.
ExprTree sample_random(int d, const Alphabet& alphabet, Rng& rng);

// Operator nodes in preorder (leaves excluded). Index i here is the node
// identity used by replace_operator.
int operator_count(const ExprTree& tree);

// Returns a copy with the operator at preorder operator-index `index`
// replaced. The replacement must match the node's arity.
ExprTree replace_operator(const ExprTree& tree, int index, UnaryOp op);
ExprTree replace_operator(const ExprTree& tree, int index, BinaryOp op);

// One-point mutation: a uniformly chosen operator node gets a different
// operator of the same arity, uniform over the remaining alphabet members.
// Depth and node count are preserved.
ExprTree mutate(const ExprTree& tree, const Alphabet& alphabet, Rng& rng);

// Deterministic subtree exchange: the subtree of `recipient` rooted at
// preorder node `recipient_node` is replaced by a copy of the subtree of
// `donor` rooted at `donor_node`. Heights must match.
ExprTree crossover_at(const ExprTree& recipient, int recipient_node,
                      const ExprTree& donor, int donor_node);

// Random crossover: swap node uniform over all of parent1's nodes, donor
// uniform over parent2's nodes of the same structural height. The child
// stays in the parents' search space.
ExprTree crossover(const ExprTree& parent1, const ExprTree& parent2, Rng& rng);

}  // namespace actevo::expr
