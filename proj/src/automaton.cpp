#include "tsrl/automaton.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace tsrl {

namespace {

bool is_tautology(const AutomatonTransition& t) {
  return t.guard.require == 0 && t.guard.forbid == 0 && !t.interval;
}

}  // namespace

TimedLdgba::TimedLdgba(AutomatonDefinition def) : def_(std::move(def)) {
  const std::size_t n = def_.state_names.size();
  for (const auto& i : def_.intervals) {
    max_finite_bound_ = std::max(max_finite_bound_, i.upper ? *i.upper : i.lower);
  }
  if (n == 0) throw AutomatonError("automaton has no states");
  if (def_.alphabet.size() > 64) throw AutomatonError("alphabet larger than 64 propositions");
  if (def_.initial >= n) throw AutomatonError("initial state out of range");
  if (def_.sink && *def_.sink >= n) throw AutomatonError("sink state out of range");

  const LabelMask universe =
      def_.alphabet.size() == 64 ? ~LabelMask{0} : ((LabelMask{1} << def_.alphabet.size()) - 1);
  outgoing_.assign(n, {});
  for (std::size_t i = 0; i < def_.transitions.size(); ++i) {
    const auto& t = def_.transitions[i];
    if (t.from >= n || t.to >= n) throw AutomatonError("transition endpoint out of range");
    if ((t.guard.require | t.guard.forbid) & ~universe) {
      throw AutomatonError("guard references a proposition outside the alphabet");
    }
    for (auto k : t.accepting) {
      if (k >= def_.accepting_sets.size()) throw AutomatonError("accepting set index out of range");
    }
    // Clock values above max_finite_bound_ + 1 must all evaluate guards alike.
    if (t.interval && t.interval->upper) {
      max_finite_bound_ = std::max(max_finite_bound_, *t.interval->upper);
    } else if (t.interval && t.interval->lower > 0) {
      max_finite_bound_ = std::max(max_finite_bound_, t.interval->lower - 1);
    }
    outgoing_[t.from].push_back(i);
  }

  if (def_.sink) {
    const StateId s = *def_.sink;
    const auto& out = outgoing_[s];
    bool loop = std::any_of(out.begin(), out.end(), [&](std::size_t i) {
      return def_.transitions[i].to == s && is_tautology(def_.transitions[i]);
    });
    if (!loop) throw AutomatonError("sink state lacks an unconditional self-loop");
    for (auto i : out) {
      if (def_.transitions[i].to != s) throw AutomatonError("sink state is not absorbing");
    }
  }

  for (const auto& set : def_.accepting_sets) {
    if (set.empty()) throw AutomatonError("empty accepting set");
    for (auto q : set) {
      if (q >= n) throw AutomatonError("accepting state out of range");
      if (def_.sink && q == *def_.sink) throw AutomatonError("sink state inside an accepting set");
    }
  }

  for (const auto& e : def_.epsilon) {
    if (e.from >= n || e.to >= n) throw AutomatonError("epsilon transition endpoint out of range");
    for (auto i : outgoing_[e.from]) {
      if (def_.transitions[i].to == e.to) {
        throw AutomatonError("epsilon transition duplicates a label-consuming transition");
      }
    }
  }
}

std::vector<StateId> TimedLdgba::epsilon_successors(StateId q) const {
  std::vector<StateId> out;
  for (const auto& e : def_.epsilon) {
    if (e.from == q) out.push_back(e.to);
  }
  return out;
}

LabelMask TimedLdgba::mask_of(const mitl::LabelSet& labels) const {
  LabelMask m = 0;
  for (std::size_t i = 0; i < def_.alphabet.size(); ++i) {
    if (labels.count(def_.alphabet[i])) m |= LabelMask{1} << i;
  }
  return m;
}

mitl::LabelSet TimedLdgba::labels_of(LabelMask mask) const {
  mitl::LabelSet out;
  for (std::size_t i = 0; i < def_.alphabet.size(); ++i) {
    if (mask & (LabelMask{1} << i)) out.insert(def_.alphabet[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void flatten_and(const mitl::Formula& f, std::vector<mitl::Formula>& out) {
  if (f.op() == mitl::Op::And) {
    flatten_and(f.lhs(), out);
    flatten_and(f.rhs(), out);
  } else {
    out.push_back(f);
  }
}

bool is_global(const mitl::Formula& f) {
  return f.op() == mitl::Op::Always && f.interval() == Interval::all();
}

Stage stage_of(const mitl::Formula& f) {
  if (f.op() != mitl::Op::Eventually || f.lhs().op() != mitl::Op::Atom) {
    throw UnsupportedFragment(
        "unsupported fragment: expected a conjunction of recurrences G F[l,u] p");
  }
  return Stage{f.lhs().proposition(), f.interval()};
}

}  // namespace

std::vector<Stage> recurrence_stages(const mitl::Formula& formula) {
  std::vector<Stage> stages;
  std::vector<mitl::Formula> parts;
  if (is_global(formula)) {
    flatten_and(formula.lhs(), parts);
    for (const auto& p : parts) stages.push_back(stage_of(p));
  } else {
    flatten_and(formula, parts);
    for (const auto& p : parts) {
      if (!is_global(p)) {
        throw UnsupportedFragment(
            "unsupported fragment: expected a conjunction of recurrences G F[l,u] p");
      }
      std::vector<mitl::Formula> inner;
      flatten_and(p.lhs(), inner);
      for (const auto& q : inner) stages.push_back(stage_of(q));
    }
  }
  return stages;
}

TimedLdgba build_recurrence_automaton(const std::vector<Stage>& stages, RecurrenceOptions options) {
  if (stages.empty()) throw std::invalid_argument("recurrence needs at least one stage");
  std::set<std::string> seen;
  for (const auto& s : stages) {
    if (s.proposition.empty()) throw std::invalid_argument("stage with empty proposition");
    if (!seen.insert(s.proposition).second) {
      throw std::invalid_argument("stages overlap on proposition '" + s.proposition + "'");
    }
    if (s.window.upper && s.window.lower > *s.window.upper) {
      throw std::invalid_argument("malformed stage window " + s.window.str());
    }
  }
  if (stages.size() > 63) throw std::invalid_argument("too many stages");

  const std::size_t n = stages.size();
  const StateId sink = n;
  AutomatonDefinition def;
  for (std::size_t k = 0; k <= n; ++k) def.state_names.push_back("q" + std::to_string(k));
  for (const auto& s : stages) {
    def.alphabet.push_back(s.proposition);
    def.intervals.push_back(s.window);
  }
  def.initial = 0;
  def.sink = sink;

  for (std::size_t k = 0; k < n; ++k) {
    const Interval& w = stages[k].window;
    const LabelMask own = LabelMask{1} << k;
    const LabelMask earlier = own - 1;
    // Clock range in which the stage is still open.
    const std::optional<Interval> open =
        w.upper ? std::optional<Interval>(Interval::closed(0, *w.upper)) : std::nullopt;

    def.transitions.push_back({k, (k + 1) % n, Guard{own, 0}, w, {k}});
    if (w.lower > 0) {
      def.transitions.push_back({k, sink, Guard{own, 0}, Interval::closed(0, w.lower - 1), {}});
    }
    if (w.upper) {
      def.transitions.push_back({k, sink, Guard{}, Interval::from(*w.upper + 1), {}});
    }
    if (options.strict_revisit) {
      for (std::size_t j = 0; j < k; ++j) {
        const LabelMask bit = LabelMask{1} << j;
        def.transitions.push_back({k, sink, Guard{bit, own | (bit - 1)}, open, {}});
      }
    }
    const LabelMask blocked = options.strict_revisit ? (own | earlier) : own;
    def.transitions.push_back({k, k, Guard{0, blocked}, open, {}});
    def.accepting_sets.push_back({(k + 1) % n});
  }
  def.transitions.push_back({sink, sink, Guard{}, std::nullopt, {}});
  return TimedLdgba(std::move(def));
}

StepOutcome automaton_step(const TimedLdgba& aut, StateId q, LabelMask labels, ClockState clock) {
  const auto& transitions = aut.definition().transitions;
  const AutomatonTransition* fired = nullptr;
  for (auto i : aut.outgoing(q)) {
    const auto& t = transitions[i];
    if (!t.guard.holds(labels)) continue;
    if (t.interval && !guard_eval(*t.interval, clock)) continue;
    if (fired) {
      throw AutomatonError("nondeterministic step from " + aut.definition().state_names[q]);
    }
    fired = &t;
  }
  if (!fired) {
    throw AutomatonError("no enabled transition from " + aut.definition().state_names[q] +
                         " at clock " + std::to_string(clock.value));
  }
  StepOutcome out;
  out.next_state = fired->to;
  out.violated = aut.is_sink(fired->to);
  if (!out.violated) out.entered_accepting = fired->accepting;
  out.cycle_completed = !out.violated && fired->to == aut.initial() && !fired->accepting.empty();
  return out;
}

StepOutcome automaton_step(const TimedLdgba& aut, StateId q, const mitl::LabelSet& labels,
                           ClockState clock) {
  return automaton_step(aut, q, aut.mask_of(labels), clock);
}

std::string WordVerdict::str() const {
  return violated ? "violated(" + std::to_string(step) + ")"
                  : "alive(" + std::to_string(cycles_completed) + ")";
}

WordVerdict run_word(const TimedLdgba& aut, const std::vector<LabelMask>& word) {
  WordVerdict v;
  StateId q = aut.initial();
  ClockState clock;
  for (std::size_t t = 0; t < word.size(); ++t) {
    ++clock.value;
    const StepOutcome out = automaton_step(aut, q, word[t], clock);
    q = out.next_state;
    if (out.violated) {
      v.violated = true;
      v.step = t + 1;
      return v;
    }
    if (out.cycle_completed) {
      ++v.cycles_completed;
      clock.value = 0;
    }
  }
  return v;
}

WordVerdict run_word(const TimedLdgba& aut, const std::vector<mitl::LabelSet>& word) {
  std::vector<LabelMask> masks;
  masks.reserve(word.size());
  for (const auto& w : word) masks.push_back(aut.mask_of(w));
  return run_word(aut, masks);
}

std::size_t lasso_unrollings(const TimedLdgba& aut) {
  return aut.num_states() * (static_cast<std::size_t>(aut.max_finite_bound()) + 2) + 1;
}

WordVerdict run_lasso(const TimedLdgba& aut, const mitl::LassoWord& word) {
  if (word.cycle.empty()) throw std::invalid_argument("lasso cycle must not be empty");
  std::vector<LabelMask> masks;
  const std::size_t copies = lasso_unrollings(aut);
  masks.reserve(word.prefix.size() + copies * word.cycle.size());
  for (const auto& w : word.prefix) masks.push_back(aut.mask_of(w));
  for (std::size_t k = 0; k < copies; ++k) {
    for (const auto& w : word.cycle) masks.push_back(aut.mask_of(w));
  }
  return run_word(aut, masks);
}

// ---------------------------------------------------------------------------
// Serialization

DumpFormat parse_dump_format(const std::string& name) {
  if (name == "dot") return DumpFormat::Dot;
  if (name == "json") return DumpFormat::Json;
  throw std::invalid_argument("unknown dump format '" + name + "' (expected dot or json)");
}

namespace {

std::vector<std::string> guard_literals(const TimedLdgba& aut, const Guard& g) {
  std::vector<std::string> out;
  const auto& alpha = aut.alphabet();
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (g.require & (LabelMask{1} << i)) out.push_back(alpha[i]);
  }
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (g.forbid & (LabelMask{1} << i)) out.push_back("!" + alpha[i]);
  }
  return out;
}

nlohmann::ordered_json interval_json(const Interval& i) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  j.push_back(i.lower);
  if (i.upper) {
    j.push_back(*i.upper);
  } else {
    j.push_back(nullptr);
  }
  return j;
}

Interval interval_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_unsigned()) {
    throw std::invalid_argument("interval must be [lower, upper|null]");
  }
  const Tick lo = j[0].get<Tick>();
  if (j[1].is_null()) return Interval::from(lo);
  if (!j[1].is_number_unsigned()) throw std::invalid_argument("interval upper bound must be a natural");
  return Interval::closed(lo, j[1].get<Tick>());
}

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

std::string dot(const TimedLdgba& aut) {
  const auto& def = aut.definition();
  std::set<StateId> accepting;
  for (const auto& set : def.accepting_sets) accepting.insert(set.begin(), set.end());

  std::ostringstream os;
  os << "digraph tldgba {\n  rankdir=LR;\n  __start [shape=point];\n";
  for (StateId q = 0; q < def.state_names.size(); ++q) {
    os << "  " << def.state_names[q] << " [";
    if (aut.is_sink(q)) {
      os << "shape=octagon, style=filled, fillcolor=gray80, label=\"" << def.state_names[q]
         << " (sink)\"";
    } else if (accepting.count(q)) {
      os << "shape=doublecircle";
    } else {
      os << "shape=circle";
    }
    os << "];\n";
  }
  os << "  __start -> " << def.state_names[def.initial] << ";\n";
  for (const auto& t : def.transitions) {
    auto lits = guard_literals(aut, t.guard);
    std::string label;
    for (std::size_t i = 0; i < lits.size(); ++i) label += (i ? " & " : "") + lits[i];
    if (label.empty()) label = "true";
    if (t.interval) label += ", " + t.interval->str();
    for (auto k : t.accepting) label += ", F" + std::to_string(k);
    os << "  " << def.state_names[t.from] << " -> " << def.state_names[t.to] << " [label=\""
       << dot_escape(label) << "\"];\n";
  }
  for (const auto& e : def.epsilon) {
    os << "  " << def.state_names[e.from] << " -> " << def.state_names[e.to]
       << " [label=\"eps\", style=dashed];\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace

nlohmann::ordered_json to_json(const TimedLdgba& aut) {
  const auto& def = aut.definition();
  nlohmann::ordered_json j;
  j["states"] = def.state_names;
  j["alphabet"] = def.alphabet;
  j["intervals"] = nlohmann::ordered_json::array();
  for (const auto& i : def.intervals) j["intervals"].push_back(interval_json(i));
  j["initial"] = def.initial;
  if (def.sink) {
    j["sink"] = *def.sink;
  } else {
    j["sink"] = nullptr;
  }
  j["accepting_sets"] = def.accepting_sets;
  j["transitions"] = nlohmann::ordered_json::array();
  for (const auto& t : def.transitions) {
    nlohmann::ordered_json tj;
    tj["from"] = t.from;
    tj["to"] = t.to;
    tj["guard_labels"] = guard_literals(aut, t.guard);
    if (t.interval) {
      tj["interval"] = interval_json(*t.interval);
    } else {
      tj["interval"] = nullptr;
    }
    tj["accepting"] = t.accepting;
    j["transitions"].push_back(std::move(tj));
  }
  j["epsilon"] = nlohmann::ordered_json::array();
  for (const auto& e : def.epsilon) j["epsilon"].push_back({e.from, e.to});
  return j;
}

TimedLdgba automaton_from_json(const nlohmann::json& j) {
  AutomatonDefinition def;
  def.state_names = j.at("states").get<std::vector<std::string>>();
  def.alphabet = j.value("alphabet", std::vector<std::string>{});
  for (const auto& i : j.value("intervals", nlohmann::json::array())) {
    def.intervals.push_back(interval_from_json(i));
  }
  def.initial = j.at("initial").get<StateId>();
  if (j.contains("sink") && !j.at("sink").is_null()) def.sink = j.at("sink").get<StateId>();
  def.accepting_sets = j.at("accepting_sets").get<std::vector<std::vector<StateId>>>();

  auto bit_of = [&](const std::string& name) -> LabelMask {
    auto it = std::find(def.alphabet.begin(), def.alphabet.end(), name);
    if (it == def.alphabet.end()) throw std::invalid_argument("guard label '" + name + "' not in alphabet");
    return LabelMask{1} << static_cast<std::size_t>(it - def.alphabet.begin());
  };
  for (const auto& tj : j.at("transitions")) {
    AutomatonTransition t;
    t.from = tj.at("from").get<StateId>();
    t.to = tj.at("to").get<StateId>();
    for (const auto& lit : tj.at("guard_labels").get<std::vector<std::string>>()) {
      if (!lit.empty() && lit[0] == '!') {
        t.guard.forbid |= bit_of(lit.substr(1));
      } else {
        t.guard.require |= bit_of(lit);
      }
    }
    if (tj.contains("interval") && !tj.at("interval").is_null()) {
      t.interval = interval_from_json(tj.at("interval"));
    }
    t.accepting = tj.value("accepting", std::vector<std::size_t>{});
    def.transitions.push_back(std::move(t));
  }
  for (const auto& e : j.value("epsilon", nlohmann::json::array())) {
    def.epsilon.push_back({e.at(0).get<StateId>(), e.at(1).get<StateId>()});
  }
  return TimedLdgba(std::move(def));
}

std::string dump(const TimedLdgba& aut, DumpFormat format) {
  if (format == DumpFormat::Dot) return dot(aut);
  return to_json(aut).dump(2) + "\n";
}

}  // namespace tsrl
