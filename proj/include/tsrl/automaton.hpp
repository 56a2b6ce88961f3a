#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsrl/interval.hpp"
#include "tsrl/mitl.hpp"

namespace tsrl {

using StateId = std::size_t;
// Label set as a bit mask over an automaton's proposition alphabet.
using LabelMask = std::uint64_t;

struct ClockState {
  Tick value = 0;
  friend bool operator==(const ClockState&, const ClockState&) = default;
};

// Conjunction of positive and negative literals over the alphabet.
struct Guard {
  LabelMask require = 0;
  LabelMask forbid = 0;
  bool holds(LabelMask labels) const { return (labels & require) == require && !(labels & forbid); }
};

struct AutomatonTransition {
  StateId from = 0;
  StateId to = 0;
  Guard guard;
  // No interval means the transition ignores the clock.
  std::optional<Interval> interval;
  // Accepting sets this transition advances into. Only stage-satisfying
  // transitions carry entries; waiting self-loops carry none.
  std::vector<std::size_t> accepting;
};

struct EpsilonTransition {
  StateId from = 0;
  StateId to = 0;
};

// Plain description used to build (and serialize) an automaton.
struct AutomatonDefinition {
  std::vector<std::string> state_names;
  std::vector<std::string> alphabet;
  std::vector<Interval> intervals;
  std::vector<AutomatonTransition> transitions;
  StateId initial = 0;
  std::optional<StateId> sink;
  std::vector<std::vector<StateId>> accepting_sets;
  std::vector<EpsilonTransition> epsilon;
};

struct StepOutcome {
  StateId next_state = 0;
  std::vector<std::size_t> entered_accepting;
  bool violated = false;
  bool cycle_completed = false;
};

class AutomatonError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Timed limit-deterministic generalized Buchi automaton with one global clock.
// Immutable after construction.
class TimedLdgba {
 public:
  explicit TimedLdgba(AutomatonDefinition def);

  const AutomatonDefinition& definition() const { return def_; }
  std::size_t num_states() const { return def_.state_names.size(); }
  StateId initial() const { return def_.initial; }
  const std::optional<StateId>& sink() const { return def_.sink; }
  bool is_sink(StateId q) const { return def_.sink && *def_.sink == q; }
  const std::vector<std::string>& alphabet() const { return def_.alphabet; }
  const std::vector<std::vector<StateId>>& accepting_sets() const { return def_.accepting_sets; }
  const std::vector<std::size_t>& outgoing(StateId q) const { return outgoing_.at(q); }
  std::vector<StateId> epsilon_successors(StateId q) const;

  // Largest finite bound among the automaton intervals; clock values above
  // max_finite_bound() + 1 are indistinguishable to every guard.
  Tick max_finite_bound() const { return max_finite_bound_; }

  // Propositions outside the alphabet are ignored.
  LabelMask mask_of(const mitl::LabelSet& labels) const;
  mitl::LabelSet labels_of(LabelMask mask) const;

 private:
  AutomatonDefinition def_;
  std::vector<std::vector<std::size_t>> outgoing_;
  Tick max_finite_bound_ = 0;
};

// One obligation of a recurrence task: visit `proposition` while the clock
// lies in `window`.
struct Stage {
  std::string proposition;
  Interval window;
  friend bool operator==(const Stage&, const Stage&) = default;
};

struct RecurrenceOptions {
  // Seeing the proposition of an already-completed stage before the current
  // stage completes is a violation.
  bool strict_revisit = false;
};

class UnsupportedFragment : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Accepts G(F_I1 p1 & ... & F_In pn) and G F_I1 p1 & ... & G F_In pn, with G
// over [0,inf); stages follow the conjunct order.
std::vector<Stage> recurrence_stages(const mitl::Formula& formula);

// Clock constraint: lower <= clock <= upper.
inline bool guard_eval(const Interval& interval, ClockState clock) {
  return interval.contains(clock.value);
}

// Stage states q0..q(n-1) followed by the sink. Stage k advances to stage
// (k+1) mod n when its proposition is seen inside its window; returning to q0
// completes a cycle.
TimedLdgba build_recurrence_automaton(const std::vector<Stage>& stages,
                                      RecurrenceOptions options = {});

// The clock must already count the current step.
StepOutcome automaton_step(const TimedLdgba& aut, StateId q, LabelMask labels, ClockState clock);
StepOutcome automaton_step(const TimedLdgba& aut, StateId q, const mitl::LabelSet& labels,
                           ClockState clock);

struct WordVerdict {
  bool violated = false;
  // 1-based step of the violation when violated.
  std::size_t step = 0;
  std::size_t cycles_completed = 0;

  std::string str() const;
};

// Reads word[t-1] at step t with the clock at t (counted from the last cycle
// completion).
WordVerdict run_word(const TimedLdgba& aut, const std::vector<mitl::LabelSet>& word);
WordVerdict run_word(const TimedLdgba& aut, const std::vector<LabelMask>& word);

// Prefix followed by enough copies of the cycle that the (state, clock) pair at
// some cycle boundary must repeat; no violation then means none ever happens.
std::size_t lasso_unrollings(const TimedLdgba& aut);
WordVerdict run_lasso(const TimedLdgba& aut, const mitl::LassoWord& word);

enum class DumpFormat { Dot, Json };
DumpFormat parse_dump_format(const std::string& name);

std::string dump(const TimedLdgba& aut, DumpFormat format);
nlohmann::ordered_json to_json(const TimedLdgba& aut);
TimedLdgba automaton_from_json(const nlohmann::json& j);

}  // namespace tsrl
