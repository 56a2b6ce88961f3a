#pragma once

#include <cstddef>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tsrl/interval.hpp"

namespace tsrl::mitl {

using LabelSet = std::set<std::string>;

enum class Op { True, Atom, And, Not, Next, Until, Eventually, Always };

struct Node;

// Immutable, shareable handle to an MITL syntax tree. Eventually and Always are
// kept as their own nodes so that printing reproduces the input; expand()
// rewrites them into the core grammar.
class Formula {
 public:
  static Formula truth();
  static Formula atom(std::string proposition);
  static Formula conj(Formula lhs, Formula rhs);
  static Formula negate(Formula sub);
  static Formula next(Formula sub);
  static Formula until(Formula lhs, Formula rhs, Interval interval);
  static Formula eventually(Formula sub, Interval interval);
  static Formula always(Formula sub, Interval interval);

  Op op() const;
  const std::string& proposition() const;
  const Interval& interval() const;
  // Left operand of And/Until, sole operand of the unary operators.
  Formula lhs() const;
  Formula rhs() const;

  // Stable identity of the underlying node; used as a memo key.
  const Node* id() const { return node_.get(); }

  // Rewrites F_I p => true U_I p and G_I p => !(true U_I !p) recursively.
  Formula expand() const;

  std::set<std::string> propositions() const;

  // Indented s-expression, one node per line.
  std::string to_sexpr() const;

  friend bool operator==(const Formula& a, const Formula& b);

 private:
  explicit Formula(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

struct Node {
  Op op = Op::True;
  std::string proposition;
  Interval interval;
  std::vector<Formula> children;
};

class ParseError : public std::runtime_error {
 public:
  enum class Kind { Syntax, UnknownProposition, MalformedInterval };

  ParseError(Kind kind, std::size_t position, const std::string& message);

  Kind kind() const { return kind_; }
  // Zero-based byte offset into the input.
  std::size_t position() const { return position_; }

 private:
  Kind kind_;
  std::size_t position_;
};

// Concrete syntax:
//   phi := true | p | ( phi ) | ! phi | X phi | F[l,u] phi | G phi | G[l,u] phi
//        | phi U[l,u] phi | phi & phi
// with u a natural number or `inf`. Unary operators bind tightest, then U
// (right associative), then & (left associative).
Formula parse(std::string_view text, const std::set<std::string>& alphabet);

// Infinite word prefix . cycle^omega over sets of propositions.
struct LassoWord {
  std::vector<LabelSet> prefix;
  std::vector<LabelSet> cycle;

  // Number of distinct positions, |prefix| + |cycle|.
  std::size_t span() const { return prefix.size() + cycle.size(); }
  // Maps any position to its representative in [0, span()).
  std::size_t canonical(std::size_t position) const;
  const LabelSet& at(std::size_t position) const;
};

// Discrete-time satisfaction (w, position) |= formula.
bool satisfies(const LassoWord& word, std::size_t position, const Formula& formula);

// Verdicts at every canonical position 0..span()-1 in one pass.
std::vector<bool> satisfaction_profile(const LassoWord& word, const Formula& formula);

}  // namespace tsrl::mitl
