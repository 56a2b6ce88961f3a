#include <doctest.h>

#include <functional>
#include <random>

#include "tsrl/mitl.hpp"

using namespace tsrl;
using namespace tsrl::mitl;

namespace {

const std::set<std::string> kAB{"a", "b"};

LassoWord word(std::vector<LabelSet> prefix, std::vector<LabelSet> cycle) { return {std::move(prefix), std::move(cycle)}; }

// Straight recursive reading of the satisfaction relation, with F and G
// evaluated from their own definitions rather than by rewriting. Unbounded
// quantifiers stop once every cycle phase past the prefix has been seen.
bool naive(const LassoWord& w, std::size_t i, const Formula& f) {
  auto horizon = [&](const Interval& I) -> std::size_t {
    if (I.upper) return i + *I.upper;
    return std::max<std::size_t>(i + I.lower, w.prefix.size()) + w.cycle.size();
  };
  switch (f.op()) {
    case Op::True:
      return true;
    case Op::Atom:
      return w.at(i).count(f.proposition()) > 0;
    case Op::And:
      return naive(w, i, f.lhs()) && naive(w, i, f.rhs());
    case Op::Not:
      return !naive(w, i, f.lhs());
    case Op::Next:
      return naive(w, i + 1, f.lhs());
    case Op::Until: {
      const std::size_t end = horizon(f.interval());
      for (std::size_t j = i; j <= end; ++j) {
        if (j - i >= f.interval().lower && naive(w, j, f.rhs())) return true;
        if (!naive(w, j, f.lhs())) return false;
      }
      return false;
    }
    case Op::Eventually: {
      const std::size_t end = horizon(f.interval());
      for (std::size_t j = i + f.interval().lower; j <= end; ++j) {
        if (naive(w, j, f.lhs())) return true;
      }
      return false;
    }
    case Op::Always: {
      const std::size_t end = horizon(f.interval());
      for (std::size_t j = i + f.interval().lower; j <= end; ++j) {
        if (!naive(w, j, f.lhs())) return false;
      }
      return true;
    }
  }
  return false;
}

std::vector<LabelSet> letters(const std::set<std::string>& props) {
  std::vector<LabelSet> out{{}};
  for (const auto& p : props) {
    const auto n = out.size();
    for (std::size_t k = 0; k < n; ++k) {
      auto s = out[k];
      s.insert(p);
      out.push_back(s);
    }
  }
  return out;
}

// Every lasso with |prefix| <= max_prefix and 1 <= |cycle| <= max_cycle.
std::vector<LassoWord> all_lassos(const std::vector<LabelSet>& sigma, std::size_t max_prefix, std::size_t max_cycle) {
  std::vector<std::vector<LabelSet>> seqs{{}};
  std::vector<std::vector<LabelSet>> by_len[8];
  by_len[0] = seqs;
  for (std::size_t len = 1; len <= std::max(max_prefix, max_cycle); ++len) {
    for (const auto& s : by_len[len - 1]) {
      for (const auto& l : sigma) {
        auto t = s;
        t.push_back(l);
        by_len[len].push_back(t);
      }
    }
  }
  std::vector<LassoWord> out;
  for (std::size_t p = 0; p <= max_prefix; ++p) {
    for (std::size_t c = 1; c <= max_cycle; ++c) {
      for (const auto& pre : by_len[p]) {
        for (const auto& cyc : by_len[c]) out.push_back({pre, cyc});
      }
    }
  }
  return out;
}

Interval random_interval(std::mt19937& g) {
  const Tick lo = g() % 4;
  if (g() % 3 == 0) return Interval::from(lo);
  return Interval::closed(lo, lo + g() % 4);
}

Formula random_formula(std::mt19937& g, int depth) {
  const int pick = depth <= 0 ? static_cast<int>(g() % 2) : static_cast<int>(g() % 8);
  switch (pick) {
    case 0:
      return Formula::atom(g() % 2 ? "a" : "b");
    case 1:
      return g() % 4 == 0 ? Formula::truth() : Formula::atom(g() % 2 ? "a" : "b");
    case 2:
      return Formula::conj(random_formula(g, depth - 1), random_formula(g, depth - 1));
    case 3:
      return Formula::negate(random_formula(g, depth - 1));
    case 4:
      return Formula::next(random_formula(g, depth - 1));
    case 5:
      return Formula::until(random_formula(g, depth - 1), random_formula(g, depth - 1), random_interval(g));
    case 6:
      return Formula::eventually(random_formula(g, depth - 1), random_interval(g));
    default:
      return Formula::always(random_formula(g, depth - 1), random_interval(g));
  }
}

std::vector<Formula> formula_pool(unsigned seed, int count) {
  std::mt19937 g(seed);
  std::vector<Formula> out;
  for (int k = 0; k < count; ++k) out.push_back(random_formula(g, 3));
  return out;
}

}  // namespace

TEST_CASE("parse: recurrence formula") {
  const auto f = parse("G (F[5,10] a & F[15,20] b)", kAB);
  const auto expected = Formula::always(
      Formula::conj(Formula::eventually(Formula::atom("a"), Interval::closed(5, 10)),
                    Formula::eventually(Formula::atom("b"), Interval::closed(15, 20))),
      Interval::all());
  CHECK(f == expected);
  CHECK(f.propositions() == kAB);
}

TEST_CASE("parse: base cases and precedence") {
  CHECK(parse("true", kAB) == Formula::truth());
  CHECK(parse("(a)", kAB) == Formula::atom("a"));
  CHECK(parse("!a & b", kAB) == Formula::conj(Formula::negate(Formula::atom("a")), Formula::atom("b")));
  CHECK(parse("a U[0,2] b & a", kAB) ==
        Formula::conj(Formula::until(Formula::atom("a"), Formula::atom("b"), Interval::closed(0, 2)),
                      Formula::atom("a")));
  CHECK(parse("X a U[1,2] b", kAB) ==
        Formula::until(Formula::next(Formula::atom("a")), Formula::atom("b"), Interval::closed(1, 2)));
  CHECK(parse("a U[0,1] b U[0,1] a", kAB) ==
        Formula::until(Formula::atom("a"),
                       Formula::until(Formula::atom("b"), Formula::atom("a"), Interval::closed(0, 1)),
                       Interval::closed(0, 1)));
  CHECK(parse("a & b & a", kAB) ==
        Formula::conj(Formula::conj(Formula::atom("a"), Formula::atom("b")), Formula::atom("a")));
  CHECK(parse("!(a & b)", kAB) == Formula::negate(Formula::conj(Formula::atom("a"), Formula::atom("b"))));
  CHECK(parse("F[5,inf) a", kAB).interval() == Interval::from(5));
  CHECK(parse("F[5,inf] a", kAB).interval() == Interval::from(5));
  CHECK(parse("G[2,3] a", kAB).interval() == Interval::closed(2, 3));
}

TEST_CASE("parse: errors") {
  auto kind_of = [](const char* text) {
    try {
      parse(text, kAB);
    } catch (const ParseError& e) {
      return e.kind();
    }
    FAIL("expected a parse error for " << text);
    return ParseError::Kind::Syntax;
  };
  CHECK(kind_of("a U[10,5] b") == ParseError::Kind::MalformedInterval);
  CHECK(kind_of("F[-1,3] a") == ParseError::Kind::MalformedInterval);
  CHECK(kind_of("c & a") == ParseError::Kind::UnknownProposition);
  CHECK(kind_of("a &") == ParseError::Kind::Syntax);
  CHECK(kind_of("(a & b") == ParseError::Kind::Syntax);
  CHECK(kind_of("F a") == ParseError::Kind::Syntax);
  CHECK(kind_of("a U b") == ParseError::Kind::Syntax);
  CHECK(kind_of("") == ParseError::Kind::Syntax);
  CHECK(kind_of("a $ b") == ParseError::Kind::Syntax);

  try {
    parse("a & (b & c)", kAB);
    FAIL("unknown proposition accepted");
  } catch (const ParseError& e) {
    CHECK(e.position() == 9);
  }
  CHECK_THROWS_AS(parse("a", {}), std::invalid_argument);
}

TEST_CASE("to_sexpr prints one node per line") {
  const auto text = parse("G (F[5,10] a & !b)", kAB).to_sexpr();
  CHECK(text.find("(always [0,inf)") == 0);
  CHECK(text.find("(eventually [5,10]") != std::string::npos);
  CHECK(text.find("(not") != std::string::npos);
}

TEST_CASE("satisfies: worked examples") {
  const auto w = word({{}, {}, {"a"}}, {{}});
  CHECK(satisfies(w, 0, parse("F[2,4] a", kAB)));
  CHECK_FALSE(satisfies(w, 0, parse("F[3,4] a", kAB)));
  CHECK(satisfies(w, 0, Formula::truth()));
  CHECK(satisfies(w, 7, Formula::truth()));
  CHECK(satisfies(word({}, {{"a"}}), 0, parse("G a", kAB)));
  CHECK_FALSE(satisfies(word({{"a"}}, {{}}), 0, parse("G a", kAB)));
  // Recurrence that holds on the cycle but not inside a tight window.
  const auto rec = word({}, {{}, {"a"}});
  CHECK(satisfies(rec, 0, parse("G F[0,1] a", kAB)));
  CHECK_FALSE(satisfies(rec, 0, parse("G F[0,0] a", kAB)));
  CHECK(satisfies(rec, 0, parse("!a U[1,1] a", kAB)));
}

TEST_CASE("lasso positions wrap into the cycle") {
  const auto w = word({{"a"}, {}}, {{"b"}, {}, {"a"}});
  CHECK(w.canonical(1) == 1);
  CHECK(w.canonical(2) == 2);
  CHECK(w.canonical(5) == 2);
  CHECK(w.canonical(9) == 3);
  CHECK(w.at(7) == LabelSet{"a"});
}

TEST_CASE("satisfies agrees with a direct recursive reading") {
  const auto words = all_lassos(letters(kAB), 3, 2);
  const auto pool = formula_pool(11, 60);
  std::size_t checked = 0;
  for (const auto& f : pool) {
    for (const auto& w : words) {
      for (std::size_t i = 0; i < w.span() + 2; ++i) {
        REQUIRE(satisfies(w, i, f) == naive(w, i, f));
        ++checked;
      }
    }
  }
  CHECK(checked > 100000);
}

TEST_CASE("property: duality, next shift, rewrite soundness, determinism") {
  std::vector<LassoWord> words = all_lassos(letters({"a"}), 6, 3);
  for (auto& w : all_lassos(letters(kAB), 3, 3)) words.push_back(std::move(w));
  std::mt19937 g(5);
  const auto sigma = letters(kAB);
  for (int k = 0; k < 400; ++k) {
    LassoWord w;
    for (unsigned p = g() % 7; p > 0; --p) w.prefix.push_back(sigma[g() % 4]);
    for (unsigned c = 1 + g() % 3; c > 0; --c) w.cycle.push_back(sigma[g() % 4]);
    words.push_back(std::move(w));
  }

  const auto pool = formula_pool(23, 25);
  const std::vector<Interval> intervals{Interval::closed(0, 0), Interval::closed(1, 3), Interval::closed(2, 2),
                                        Interval::from(0), Interval::from(2)};
  for (const auto& phi : pool) {
    const auto not_phi = Formula::negate(phi);
    const auto expanded = phi.expand();
    for (const auto& w : words) {
      for (std::size_t i = 0; i < w.span() + 1; ++i) {
        const bool v = satisfies(w, i, phi);
        REQUIRE(v == satisfies(w, i, phi));
        REQUIRE(v == satisfies(w, i, expanded));
        REQUIRE(satisfies(w, i, Formula::next(phi)) == satisfies(w, i + 1, phi));
        REQUIRE(v == satisfies(w, w.canonical(i), phi));
      }
      for (const auto& I : intervals) {
        const auto g_phi = Formula::always(phi, I);
        const auto f_not = Formula::eventually(not_phi, I);
        for (std::size_t i = 0; i < w.span(); ++i) {
          REQUIRE(satisfies(w, i, g_phi) == !satisfies(w, i, f_not));
          REQUIRE(satisfies(w, i, f_not) == satisfies(w, i, Formula::until(Formula::truth(), not_phi, I)));
        }
      }
    }
  }
}
