#include "tsrl/mitl.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <unordered_map>

namespace tsrl::mitl {

namespace {

std::shared_ptr<Node> make_node(Op op) {
  auto n = std::make_shared<Node>();
  n->op = op;
  return n;
}

}  // namespace

Formula Formula::truth() { return Formula(make_node(Op::True)); }

Formula Formula::atom(std::string proposition) {
  auto n = make_node(Op::Atom);
  n->proposition = std::move(proposition);
  return Formula(n);
}

Formula Formula::conj(Formula lhs, Formula rhs) {
  auto n = make_node(Op::And);
  n->children = {std::move(lhs), std::move(rhs)};
  return Formula(n);
}

Formula Formula::negate(Formula sub) {
  auto n = make_node(Op::Not);
  n->children = {std::move(sub)};
  return Formula(n);
}

Formula Formula::next(Formula sub) {
  auto n = make_node(Op::Next);
  n->children = {std::move(sub)};
  return Formula(n);
}

Formula Formula::until(Formula lhs, Formula rhs, Interval interval) {
  auto n = make_node(Op::Until);
  n->interval = interval;
  n->children = {std::move(lhs), std::move(rhs)};
  return Formula(n);
}

Formula Formula::eventually(Formula sub, Interval interval) {
  auto n = make_node(Op::Eventually);
  n->interval = interval;
  n->children = {std::move(sub)};
  return Formula(n);
}

Formula Formula::always(Formula sub, Interval interval) {
  auto n = make_node(Op::Always);
  n->interval = interval;
  n->children = {std::move(sub)};
  return Formula(n);
}

Op Formula::op() const { return node_->op; }
const std::string& Formula::proposition() const { return node_->proposition; }
const Interval& Formula::interval() const { return node_->interval; }
Formula Formula::lhs() const { return node_->children.at(0); }
Formula Formula::rhs() const { return node_->children.at(1); }

Formula Formula::expand() const {
  switch (op()) {
    case Op::True:
    case Op::Atom:
      return *this;
    case Op::And:
      return conj(lhs().expand(), rhs().expand());
    case Op::Not:
      return negate(lhs().expand());
    case Op::Next:
      return next(lhs().expand());
    case Op::Until:
      return until(lhs().expand(), rhs().expand(), interval());
    case Op::Eventually:
      return until(truth(), lhs().expand(), interval());
    case Op::Always:
      return negate(until(truth(), negate(lhs().expand()), interval()));
  }
  return *this;
}

std::set<std::string> Formula::propositions() const {
  std::set<std::string> out;
  if (op() == Op::Atom) out.insert(proposition());
  for (const auto& c : node_->children) {
    auto sub = c.propositions();
    out.insert(sub.begin(), sub.end());
  }
  return out;
}

namespace {

void render(const Formula& f, int depth, std::string& out) {
  out.append(static_cast<std::size_t>(depth) * 2, ' ');
  switch (f.op()) {
    case Op::True:
      out += "true";
      return;
    case Op::Atom:
      out += f.proposition();
      return;
    case Op::And:
      out += "(and";
      break;
    case Op::Not:
      out += "(not";
      break;
    case Op::Next:
      out += "(next";
      break;
    case Op::Until:
      out += "(until " + f.interval().str();
      break;
    case Op::Eventually:
      out += "(eventually " + f.interval().str();
      break;
    case Op::Always:
      out += "(always " + f.interval().str();
      break;
  }
  const bool binary = f.op() == Op::And || f.op() == Op::Until;
  out += '\n';
  render(f.lhs(), depth + 1, out);
  if (binary) {
    out += '\n';
    render(f.rhs(), depth + 1, out);
  }
  out += ')';
}

}  // namespace

std::string Formula::to_sexpr() const {
  std::string out;
  render(*this, 0, out);
  return out;
}

bool operator==(const Formula& a, const Formula& b) {
  if (a.node_ == b.node_) return true;
  if (a.op() != b.op() || a.node_->children.size() != b.node_->children.size()) return false;
  if (a.op() == Op::Atom && a.proposition() != b.proposition()) return false;
  if ((a.op() == Op::Until || a.op() == Op::Eventually || a.op() == Op::Always) &&
      !(a.interval() == b.interval())) {
    return false;
  }
  for (std::size_t i = 0; i < a.node_->children.size(); ++i) {
    if (!(a.node_->children[i] == b.node_->children[i])) return false;
  }
  return true;
}

ParseError::ParseError(Kind kind, std::size_t position, const std::string& message)
    : std::runtime_error("at position " + std::to_string(position) + ": " + message),
      kind_(kind),
      position_(position) {}

// ---------------------------------------------------------------------------
// Parser

namespace {

enum class Tok { LParen, RParen, LBracket, RBracket, Comma, Amp, Bang, Minus, Ident, Number, End };

struct Token {
  Tok kind;
  std::string text;
  std::size_t pos;
};

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    auto single = [&](Tok k) {
      out.push_back({k, std::string(1, c), i});
      ++i;
    };
    switch (c) {
      case '(': single(Tok::LParen); continue;
      case ')': single(Tok::RParen); continue;
      case '[': single(Tok::LBracket); continue;
      case ']': single(Tok::RBracket); continue;
      case ',': single(Tok::Comma); continue;
      case '&': single(Tok::Amp); continue;
      case '!': single(Tok::Bang); continue;
      case '-': single(Tok::Minus); continue;
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      out.push_back({Tok::Number, std::string(s.substr(i, j - i)), i});
      i = j;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      out.push_back({Tok::Ident, std::string(s.substr(i, j - i)), i});
      i = j;
      continue;
    }
    throw ParseError(ParseError::Kind::Syntax, i, std::string("unexpected character '") + c + "'");
  }
  out.push_back({Tok::End, "", s.size()});
  return out;
}

class Parser {
 public:
  Parser(std::string_view text, const std::set<std::string>& alphabet)
      : tokens_(tokenize(text)), alphabet_(alphabet) {}

  Formula run() {
    Formula f = conjunction();
    if (peek().kind != Tok::End) syntax("unexpected '" + peek().text + "'");
    return f;
  }

 private:
  const Token& peek() const { return tokens_[at_]; }
  const Token& take() { return tokens_[at_++]; }
  bool keyword(std::string_view kw) const { return peek().kind == Tok::Ident && peek().text == kw; }

  [[noreturn]] void syntax(const std::string& msg) const {
    throw ParseError(ParseError::Kind::Syntax, peek().pos, msg);
  }

  void expect(Tok kind, std::string_view what) {
    if (peek().kind != kind) {
      syntax("expected " + std::string(what) +
             (peek().kind == Tok::End ? " at end of input" : ", found '" + peek().text + "'"));
    }
    take();
  }

  Formula conjunction() {
    Formula f = until();
    while (peek().kind == Tok::Amp) {
      take();
      f = Formula::conj(f, until());
    }
    return f;
  }

  Formula until() {
    Formula lhs = unary();
    if (keyword("U")) {
      take();
      if (peek().kind != Tok::LBracket) syntax("U requires an interval such as U[0,5]");
      Interval i = interval();
      return Formula::until(lhs, until(), i);
    }
    return lhs;
  }

  Formula unary() {
    if (peek().kind == Tok::Bang) {
      take();
      return Formula::negate(unary());
    }
    if (keyword("X")) {
      take();
      return Formula::next(unary());
    }
    if (keyword("F")) {
      take();
      if (peek().kind != Tok::LBracket) syntax("F requires an interval such as F[0,5]");
      Interval i = interval();
      return Formula::eventually(unary(), i);
    }
    if (keyword("G")) {
      take();
      Interval i = peek().kind == Tok::LBracket ? interval() : Interval::all();
      return Formula::always(unary(), i);
    }
    return primary();
  }

  Formula primary() {
    const Token& t = peek();
    if (t.kind == Tok::LParen) {
      take();
      Formula f = conjunction();
      expect(Tok::RParen, "')'");
      return f;
    }
    if (t.kind == Tok::Ident) {
      if (t.text == "true") {
        take();
        return Formula::truth();
      }
      if (t.text == "U" || t.text == "F" || t.text == "G" || t.text == "X" || t.text == "inf") {
        syntax("unexpected keyword '" + t.text + "'");
      }
      if (!alphabet_.count(t.text)) {
        throw ParseError(ParseError::Kind::UnknownProposition, t.pos,
                         "unknown proposition '" + t.text + "'");
      }
      take();
      return Formula::atom(t.text);
    }
    if (t.kind == Tok::End) syntax("unexpected end of input");
    syntax("unexpected '" + t.text + "'");
  }

  Tick bound() {
    const Token& t = peek();
    if (t.kind == Tok::Minus) {
      throw ParseError(ParseError::Kind::MalformedInterval, t.pos, "negative interval bound");
    }
    if (t.kind != Tok::Number) syntax("expected interval bound");
    Tick v = 0;
    auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc()) {
      throw ParseError(ParseError::Kind::MalformedInterval, t.pos, "interval bound out of range");
    }
    take();
    return v;
  }

  Interval interval() {
    const std::size_t start = peek().pos;
    expect(Tok::LBracket, "'['");
    const Tick lo = bound();
    expect(Tok::Comma, "','");
    if (keyword("inf")) {
      take();
      if (peek().kind != Tok::RBracket && peek().kind != Tok::RParen) syntax("expected ']' or ')'");
      take();
      return Interval::from(lo);
    }
    const Tick hi = bound();
    expect(Tok::RBracket, "']'");
    if (lo > hi) {
      throw ParseError(ParseError::Kind::MalformedInterval, start,
                       "malformed interval [" + std::to_string(lo) + "," + std::to_string(hi) +
                           "]: lower bound exceeds upper bound");
    }
    return Interval::closed(lo, hi);
  }

  std::vector<Token> tokens_;
  std::size_t at_ = 0;
  const std::set<std::string>& alphabet_;
};

}  // namespace

Formula parse(std::string_view text, const std::set<std::string>& alphabet) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw ParseError(ParseError::Kind::Syntax, 0, "empty formula");
  }
  if (alphabet.empty()) throw std::invalid_argument("proposition alphabet is empty");
  return Parser(text, alphabet).run();
}

// ---------------------------------------------------------------------------
// Semantics

std::size_t LassoWord::canonical(std::size_t position) const {
  if (cycle.empty()) throw std::invalid_argument("lasso word has an empty cycle");
  if (position < prefix.size()) return position;
  return prefix.size() + (position - prefix.size()) % cycle.size();
}

const LabelSet& LassoWord::at(std::size_t position) const {
  const std::size_t c = canonical(position);
  return c < prefix.size() ? prefix[c] : cycle[c - prefix.size()];
}

namespace {

// Truth tables per subformula over canonical positions. Positions sharing a
// canonical representative see the same suffix, so one entry per
// (node, representative) covers every position of the infinite word.
class Evaluator {
 public:
  explicit Evaluator(const LassoWord& w) : w_(w), n_(w.span()) {}

  const std::vector<char>& eval(const Formula& f) {
    if (auto it = memo_.find(f.id()); it != memo_.end()) return it->second;
    std::vector<char> v(n_, 0);
    switch (f.op()) {
      case Op::True:
        std::fill(v.begin(), v.end(), 1);
        break;
      case Op::Atom:
        for (std::size_t i = 0; i < n_; ++i) v[i] = w_.at(i).count(f.proposition()) ? 1 : 0;
        break;
      case Op::And: {
        const auto& a = eval(f.lhs());
        const auto& b = eval(f.rhs());
        for (std::size_t i = 0; i < n_; ++i) v[i] = a[i] && b[i];
        break;
      }
      case Op::Not: {
        const auto& a = eval(f.lhs());
        for (std::size_t i = 0; i < n_; ++i) v[i] = !a[i];
        break;
      }
      case Op::Next: {
        const auto& a = eval(f.lhs());
        for (std::size_t i = 0; i < n_; ++i) v[i] = a[w_.canonical(i + 1)];
        break;
      }
      case Op::Until: {
        const auto lhs = eval(f.lhs());
        const auto& rhs = eval(f.rhs());
        for (std::size_t i = 0; i < n_; ++i) v[i] = until_at(i, lhs, rhs, f.interval());
        break;
      }
      case Op::Eventually: {
        const std::vector<char> all(n_, 1);
        const auto& sub = eval(f.lhs());
        for (std::size_t i = 0; i < n_; ++i) v[i] = until_at(i, all, sub, f.interval());
        break;
      }
      case Op::Always: {
        const std::vector<char> all(n_, 1);
        std::vector<char> neg = eval(f.lhs());
        for (auto& x : neg) x = !x;
        for (std::size_t i = 0; i < n_; ++i) v[i] = !until_at(i, all, neg, f.interval());
        break;
      }
    }
    return memo_.emplace(f.id(), std::move(v)).first->second;
  }

 private:
  bool until_at(std::size_t i, const std::vector<char>& lhs, const std::vector<char>& rhs,
                const Interval& in) const {
    std::size_t stop;
    if (in.upper) {
      stop = i + *in.upper + 1;
    } else {
      // Past max(i + lower, |prefix|) every candidate repeats one already seen
      // within a single cycle length.
      stop = std::max(i + in.lower, w_.prefix.size()) + w_.cycle.size();
    }
    for (std::size_t j = i; j < stop; ++j) {
      const std::size_t c = w_.canonical(j);
      if (j - i >= in.lower && rhs[c]) return true;
      if (!lhs[c]) return false;
    }
    return false;
  }

  const LassoWord& w_;
  std::size_t n_;
  std::unordered_map<const Node*, std::vector<char>> memo_;
};

}  // namespace

std::vector<bool> satisfaction_profile(const LassoWord& word, const Formula& formula) {
  if (word.cycle.empty()) throw std::invalid_argument("lasso word has an empty cycle");
  Evaluator ev(word);
  const auto& v = ev.eval(formula);
  return std::vector<bool>(v.begin(), v.end());
}

bool satisfies(const LassoWord& word, std::size_t position, const Formula& formula) {
  if (word.cycle.empty()) throw std::invalid_argument("lasso word has an empty cycle");
  Evaluator ev(word);
  return ev.eval(formula)[word.canonical(position)];
}

}  // namespace tsrl::mitl
