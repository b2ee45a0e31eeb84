#include "actevo/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <utility>

#include "actevo/errors.hpp"

namespace actevo::expr {

namespace {

constexpr std::array<std::string_view, kExtendedUnaryCount> kUnaryTokens = {
    "zero", "one",  "id",    "neg",  "abs",     "square", "cube",
    "sqrt", "exp",  "gauss", "softplus", "logeps", "sin",  "sinh",
    "asinh", "cos", "cosh",  "tanh", "atanh",   "relu",   "nmin",
    "sigmoid", "erf", "sinc", "atan"};

constexpr std::array<std::string_view, kBinaryCount> kBinaryTokens = {
    "add", "sub", "mul", "diveps", "max", "min"};

}  // namespace

std::string_view token(UnaryOp op) { return kUnaryTokens[static_cast<int>(op)]; }
std::string_view token(BinaryOp op) { return kBinaryTokens[static_cast<int>(op)]; }

std::vector<UnaryOp> Alphabet::sorted_unaries() const {
  std::vector<UnaryOp> out;
  out.reserve(unary_count());
  for (int i = 0; i < unary_count(); ++i) out.push_back(static_cast<UnaryOp>(i));
  std::sort(out.begin(), out.end(),
            [](UnaryOp a, UnaryOp b) { return token(a) < token(b); });
  return out;
}

std::vector<BinaryOp> Alphabet::sorted_binaries() {
  std::vector<BinaryOp> out;
  for (int i = 0; i < kBinaryCount; ++i) out.push_back(static_cast<BinaryOp>(i));
  std::sort(out.begin(), out.end(),
            [](BinaryOp a, BinaryOp b) { return token(a) < token(b); });
  return out;
}

ExprNode ExprNode::make_unary(UnaryOp op, ExprNode child) {
  ExprNode n;
  n.kind = Kind::kUnary;
  n.unary = op;
  n.children.push_back(std::move(child));
  return n;
}

ExprNode ExprNode::make_binary(BinaryOp op, ExprNode lhs, ExprNode rhs) {
  ExprNode n;
  n.kind = Kind::kBinary;
  n.binary = op;
  n.children.push_back(std::move(lhs));
  n.children.push_back(std::move(rhs));
  return n;
}

int structural_height(const ExprNode& node) {
  switch (node.kind) {
    case ExprNode::Kind::kLeaf:
      return 0;
    case ExprNode::Kind::kUnary:
      return 1 + structural_height(node.children[0]);
    case ExprNode::Kind::kBinary:
      return 1 + std::max(structural_height(node.children[0]),
                          structural_height(node.children[1]));
  }
  return 0;
}

namespace {

// Core-unit depth of a balanced subtree rooted at a binary node; throws
// StructureError when the balance or alternation rules are violated.
int validate_core_unit(const ExprNode& node) {
  if (node.kind != ExprNode::Kind::kBinary)
    throw StructureError("expected a binary node at the root of a core unit");
  int child_depths[2];
  for (int i = 0; i < 2; ++i) {
    const ExprNode& u = node.children[i];
    if (u.kind != ExprNode::Kind::kUnary)
      throw StructureError("binary node child must be a unary node");
    const ExprNode& arg = u.children[0];
    if (arg.kind == ExprNode::Kind::kLeaf) {
      child_depths[i] = 0;
    } else if (arg.kind == ExprNode::Kind::kBinary) {
      child_depths[i] = validate_core_unit(arg);
    } else {
      throw StructureError("unary node argument must be a leaf or a core unit");
    }
  }
  if (child_depths[0] != child_depths[1])
    throw StructureError("core-unit branches have unequal depth");
  return 1 + child_depths[0];
}

}  // namespace

int depth(const ExprTree& tree) { return validate_core_unit(tree.root); }

namespace {

int count_nodes(const ExprNode& n) {
  int c = 1;
  for (const ExprNode& k : n.children) c += count_nodes(k);
  return c;
}

void print_node(const ExprNode& n, std::string& out) {
  switch (n.kind) {
    case ExprNode::Kind::kLeaf:
      out += 'x';
      return;
    case ExprNode::Kind::kUnary:
      out += token(n.unary);
      out += '(';
      print_node(n.children[0], out);
      out += ')';
      return;
    case ExprNode::Kind::kBinary:
      out += token(n.binary);
      out += '(';
      print_node(n.children[0], out);
      out += ", ";
      print_node(n.children[1], out);
      out += ')';
      return;
  }
}

}  // namespace

std::string print_tree(const ExprTree& tree) {
  std::string out;
  print_node(tree.root, out);
  return out;
}

std::string canonical_id(const ExprTree& tree) { return print_tree(tree); }

int node_count(const ExprTree& tree) { return count_nodes(tree.root); }

namespace {

class Parser {
 public:
  Parser(std::string_view text, const Alphabet& alphabet)
      : text_(text), alphabet_(alphabet) {}

  ExprTree parse() {
    skip_ws();
    const std::size_t start = pos_;
    const std::string ident = read_ident("binary operator");
    ExprNode root;
    if (auto b = find_binary(ident)) {
      root = parse_binary_body(*b);
    } else if (find_unary(ident)) {
      // Legal utree text, but a bare unary is not a core unit. Consume it
      // fully so the diagnostic reflects the whole input.
      throw StructureError("'" + ident +
                           "(...)' is a bare unary, not a core unit; wrap it "
                           "in a binary node such as max(relu(x), zero(x))");
    } else {
      fail(start, "binary operator", ident);
    }
    skip_ws();
    if (pos_ != text_.size()) fail(pos_, "end of input", peek_text());
    ExprTree tree{std::move(root)};
    depth(tree);  // balance check, throws StructureError
    return tree;
  }

 private:
  ExprNode parse_tree_node() {
    skip_ws();
    const std::size_t start = pos_;
    const std::string ident = read_ident("binary operator");
    const auto b = find_binary(ident);
    if (!b) fail(start, "binary operator", ident);
    return parse_binary_body(*b);
  }

  ExprNode parse_binary_body(BinaryOp op) {
    expect('(');
    ExprNode lhs = parse_unary_node();
    expect(',');
    ExprNode rhs = parse_unary_node();
    expect(')');
    return ExprNode::make_binary(op, std::move(lhs), std::move(rhs));
  }

  ExprNode parse_unary_node() {
    skip_ws();
    const std::size_t start = pos_;
    const std::string ident = read_ident("unary operator");
    const auto u = find_unary(ident);
    if (!u) fail(start, "unary operator", ident);
    expect('(');
    ExprNode arg = parse_arg();
    expect(')');
    return ExprNode::make_unary(*u, std::move(arg));
  }

  ExprNode parse_arg() {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == 'x') {
      // "x" only when not the start of a longer identifier.
      if (pos_ + 1 == text_.size() || !is_ident_char(text_[pos_ + 1])) {
        ++pos_;
        return ExprNode::leaf();
      }
    }
    return parse_tree_node();
  }

  std::optional<UnaryOp> find_unary(const std::string& ident) const {
    for (int i = 0; i < alphabet_.unary_count(); ++i)
      if (kUnaryTokens[i] == ident) return static_cast<UnaryOp>(i);
    return std::nullopt;
  }

  std::optional<BinaryOp> find_binary(const std::string& ident) const {
    for (int i = 0; i < kBinaryCount; ++i)
      if (kBinaryTokens[i] == ident) return static_cast<BinaryOp>(i);
    return std::nullopt;
  }

  static bool is_ident_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  }

  std::string read_ident(std::string_view expected) {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
    if (pos_ == start) fail(start, std::string(expected), peek_text());
    return std::string(text_.substr(start, pos_ - start));
  }

  void expect(char c) {
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != c)
      fail(pos_, std::string(1, c), peek_text());
    ++pos_;
  }

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  std::string peek_text() const {
    if (pos_ >= text_.size()) return "end of input";
    return std::string(text_.substr(pos_, std::min<std::size_t>(8, text_.size() - pos_)));
  }

  [[noreturn]] void fail(std::size_t at, std::string expected, std::string got) {
    std::string hint;
    if (got == "atan" && !alphabet_.extended)
      hint = " ('atan' needs the extended alphabet)";
    throw ParseError("parse error at position " + std::to_string(at) +
                         ": expected " + expected + ", got '" + got + "'" + hint,
                     at, std::move(expected));
  }

  std::string_view text_;
  const Alphabet& alphabet_;
  std::size_t pos_ = 0;
};

}  // namespace

ExprTree parse_tree(std::string_view text, const Alphabet& alphabet) {
  return Parser(text, alphabet).parse();
}

std::vector<ExprTree> enumerate_s1(const Alphabet& alphabet) {
  const auto binaries = Alphabet::sorted_binaries();
  const auto unaries = alphabet.sorted_unaries();
  std::vector<ExprTree> out;
  out.reserve(binaries.size() * unaries.size() * unaries.size());
  for (BinaryOp b : binaries)
    for (UnaryOp u1 : unaries)
      for (UnaryOp u2 : unaries)
        out.push_back(ExprTree{ExprNode::make_binary(
            b, ExprNode::make_unary(u1, ExprNode::leaf()),
            ExprNode::make_unary(u2, ExprNode::leaf()))});
  return out;
}

namespace {

// Minimal decimal bignum, enough for B^(2^d - 1).
class BigUint {
 public:
  explicit BigUint(std::uint64_t v) {
    while (v > 0) {
      limbs_.push_back(static_cast<std::uint32_t>(v % kBase));
      v /= kBase;
    }
    if (limbs_.empty()) limbs_.push_back(0);
  }

  BigUint operator*(const BigUint& other) const {
    BigUint out(0);
    out.limbs_.assign(limbs_.size() + other.limbs_.size(), 0);
    for (std::size_t i = 0; i < limbs_.size(); ++i) {
      std::uint64_t carry = 0;
      for (std::size_t j = 0; j < other.limbs_.size(); ++j) {
        const std::uint64_t cur =
            static_cast<std::uint64_t>(out.limbs_[i + j]) +
            static_cast<std::uint64_t>(limbs_[i]) * other.limbs_[j] + carry;
        out.limbs_[i + j] = static_cast<std::uint32_t>(cur % kBase);
        carry = cur / kBase;
      }
      std::size_t k = i + other.limbs_.size();
      while (carry > 0) {
        const std::uint64_t cur = out.limbs_[k] + carry;
        out.limbs_[k] = static_cast<std::uint32_t>(cur % kBase);
        carry = cur / kBase;
        ++k;
      }
    }
    while (out.limbs_.size() > 1 && out.limbs_.back() == 0) out.limbs_.pop_back();
    return out;
  }

  std::string to_string() const {
    std::string s = std::to_string(limbs_.back());
    for (auto it = limbs_.rbegin() + 1; it != limbs_.rend(); ++it) {
      std::string part = std::to_string(*it);
      s += std::string(9 - part.size(), '0') + part;
    }
    return s;
  }

 private:
  static constexpr std::uint64_t kBase = 1000000000;
  std::vector<std::uint32_t> limbs_;
};

}  // namespace

std::string count_space(int d, const Alphabet& alphabet) {
  const std::uint64_t units =
      static_cast<std::uint64_t>(kBinaryCount) * alphabet.unary_count() *
      alphabet.unary_count();
  // units^(2^d - 1) by square and multiply.
  BigUint result(1);
  BigUint base(units);
  std::uint64_t exponent = (d >= 64) ? ~0ULL : ((1ULL << d) - 1);
  while (exponent > 0) {
    if (exponent & 1) result = result * base;
    exponent >>= 1;
    if (exponent > 0) base = base * base;
  }
  return result.to_string();
}

namespace {

ExprNode sample_core_unit(int d, const Alphabet& alphabet, Rng& rng) {
  const BinaryOp b = static_cast<BinaryOp>(rng.uniform_int(kBinaryCount));
  ExprNode children[2];
  for (ExprNode& child : children) {
    const UnaryOp u =
        static_cast<UnaryOp>(rng.uniform_int(alphabet.unary_count()));
    ExprNode arg = (d == 1) ? ExprNode::leaf()
                            : sample_core_unit(d - 1, alphabet, rng);
    child = ExprNode::make_unary(u, std::move(arg));
  }
  return ExprNode::make_binary(b, std::move(children[0]), std::move(children[1]));
}

void collect_operator_nodes(ExprNode& n, std::vector<ExprNode*>& out) {
  if (n.kind != ExprNode::Kind::kLeaf) out.push_back(&n);
  for (ExprNode& k : n.children) collect_operator_nodes(k, out);
}

void collect_all_nodes(ExprNode& n, std::vector<ExprNode*>& out) {
  out.push_back(&n);
  for (ExprNode& k : n.children) collect_all_nodes(k, out);
}

}  // namespace

ExprTree sample_random(int d, const Alphabet& alphabet, Rng& rng) {
  if (d < 1) throw std::invalid_argument("sample_random: depth must be >= 1");
  return ExprTree{sample_core_unit(d, alphabet, rng)};
}

int operator_count(const ExprTree& tree) {
  ExprTree copy = tree;
  std::vector<ExprNode*> ops;
  collect_operator_nodes(copy.root, ops);
  return static_cast<int>(ops.size());
}

ExprTree replace_operator(const ExprTree& tree, int index, UnaryOp op) {
  ExprTree out = tree;
  std::vector<ExprNode*> ops;
  collect_operator_nodes(out.root, ops);
  ExprNode* n = ops.at(index);
  if (n->kind != ExprNode::Kind::kUnary)
    throw std::invalid_argument("replace_operator: node is not unary");
  n->unary = op;
  return out;
}

ExprTree replace_operator(const ExprTree& tree, int index, BinaryOp op) {
  ExprTree out = tree;
  std::vector<ExprNode*> ops;
  collect_operator_nodes(out.root, ops);
  ExprNode* n = ops.at(index);
  if (n->kind != ExprNode::Kind::kBinary)
    throw std::invalid_argument("replace_operator: node is not binary");
  n->binary = op;
  return out;
}

ExprTree mutate(const ExprTree& tree, const Alphabet& alphabet, Rng& rng) {
  ExprTree out = tree;
  std::vector<ExprNode*> ops;
  collect_operator_nodes(out.root, ops);
  ExprNode* n = ops[rng.uniform_int(ops.size())];
  if (n->kind == ExprNode::Kind::kUnary) {
    // Uniform over the other members: draw from [0, count-1) and skip the
    // current operator's slot.
    const int cur = static_cast<int>(n->unary);
    int pick = static_cast<int>(rng.uniform_int(alphabet.unary_count() - 1));
    if (pick >= cur) ++pick;
    n->unary = static_cast<UnaryOp>(pick);
  } else {
    const int cur = static_cast<int>(n->binary);
    int pick = static_cast<int>(rng.uniform_int(kBinaryCount - 1));
    if (pick >= cur) ++pick;
    n->binary = static_cast<BinaryOp>(pick);
  }
  return out;
}

ExprTree crossover_at(const ExprTree& recipient, int recipient_node,
                      const ExprTree& donor, int donor_node) {
  ExprTree out = recipient;
  ExprTree donor_copy = donor;
  std::vector<ExprNode*> rnodes, dnodes;
  collect_all_nodes(out.root, rnodes);
  collect_all_nodes(donor_copy.root, dnodes);
  ExprNode* dst = rnodes.at(recipient_node);
  ExprNode* src = dnodes.at(donor_node);
  if (structural_height(*dst) != structural_height(*src))
    throw DepthMismatch("crossover_at: subtree heights differ");
  *dst = *src;
  return out;
}

ExprTree crossover(const ExprTree& parent1, const ExprTree& parent2, Rng& rng) {
  if (depth(parent1) != depth(parent2))
    throw DepthMismatch("crossover: parents must live in the same search space");
  ExprTree out = parent1;
  ExprTree donor = parent2;
  std::vector<ExprNode*> p1nodes, p2nodes;
  collect_all_nodes(out.root, p1nodes);
  collect_all_nodes(donor.root, p2nodes);

  ExprNode* dst = p1nodes[rng.uniform_int(p1nodes.size())];
  const int want = structural_height(*dst);
  std::vector<ExprNode*> donors;
  for (ExprNode* n : p2nodes)
    if (structural_height(*n) == want) donors.push_back(n);
  ExprNode* src = donors[rng.uniform_int(donors.size())];
  *dst = *src;
  return out;
}

}  // namespace actevo::expr
