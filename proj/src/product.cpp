#include "tsrl/product.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>

namespace tsrl {

void RewardSpec::validate() const {
  if (!(accept_reward > 0.0)) throw std::invalid_argument("accept_reward must be positive");
  if (movement_penalty > 0.0) throw std::invalid_argument("movement_penalty must not be positive");
}

Product::Product(const GridWorld& env, const TimedLdgba& aut, RewardSpec reward)
    : env_(&env), aut_(&aut), reward_(reward) {
  reward_.validate();
  label_masks_.resize(env.num_cells());
  for (std::size_t i = 0; i < env.num_cells(); ++i) {
    label_masks_[i] = aut.mask_of(env.labels(env.cell_at(i)));
  }
}

ProductState Product::initial() const { return {env_->spec().start, aut_->initial(), ClockState{}}; }

std::size_t Product::default_horizon() const {
  std::size_t total = 0;
  for (const auto& i : aut_->definition().intervals) {
    if (i.upper) total += *i.upper;
  }
  return std::max<std::size_t>(60, 3 * total);
}

ProductStepResult Product::step(const ProductState& state, ProductAction action, Rng& rng) const {
  if (aut_->is_sink(state.automaton_state)) {
    throw PreconditionError("product_step called from the sink state");
  }
  ProductStepResult r;
  if (const auto* eps = std::get_if<EpsilonMove>(&action)) {
    const auto succ = aut_->epsilon_successors(state.automaton_state);
    if (std::find(succ.begin(), succ.end(), eps->target) == succ.end()) {
      throw std::invalid_argument("no epsilon edge to the requested automaton state");
    }
    r.next = {state.cell, eps->target, state.clock};
    r.observation = std::numeric_limits<std::size_t>::max();
    r.labels = labels(state.cell);
    r.done = aut_->is_sink(eps->target);
    return r;
  }

  const Move move = std::get<Move>(action);
  const Cell next = env_->step(state.cell, move, rng);
  ClockState clock{state.clock.value + 1};
  r.labels = labels(next);
  const StepOutcome out = automaton_step(*aut_, state.automaton_state, r.labels, clock);
  if (out.cycle_completed) clock.value = 0;
  r.next = {next, out.next_state, clock};
  r.accepting_entered = out.entered_accepting;
  r.cycle_completed = out.cycle_completed;
  if (out.violated) {
    r.reward = RewardSpec::sink_reward;
    r.done = true;
  } else {
    r.reward = (out.entered_accepting.empty() ? 0.0 : reward_.accept_reward) +
               (move == Move::Stay ? 0.0 : reward_.movement_penalty);
  }
  r.observation = env_->observe(next, rng);
  return r;
}

ProductStepResult product_step(const GridWorld& env, const TimedLdgba& aut, const ProductState& state,
                               ProductAction action, const RewardSpec& reward, Rng& rng) {
  return Product(env, aut, reward).step(state, action, rng);
}

// ---------------------------------------------------------------------------

std::size_t EnumeratedProduct::index_of(const ProductState& s) const {
  const std::size_t cell = static_cast<std::size_t>(s.cell.y) * width_ + static_cast<std::size_t>(s.cell.x);
  const Tick clock = std::min(s.clock.value, clock_bound);
  const std::size_t slot = (cell * automaton_states_ + s.automaton_state) * (clock_bound + 1) + clock;
  if (cell >= cells_ || s.automaton_state >= automaton_states_ || slot_[slot] == SIZE_MAX) {
    throw std::out_of_range("product state not enumerated");
  }
  return slot_[slot];
}

EnumeratedProduct enumerate_product(const GridWorld& env, const TimedLdgba& aut,
                                    const RewardSpec& reward, Tick clock_bound) {
  if (clock_bound < aut.max_finite_bound() + 2) {
    throw std::invalid_argument("clock_bound must be at least the largest finite bound + 2");
  }
  reward.validate();
  const Product product(env, aut, reward);

  std::size_t passable = 0;
  for (std::size_t i = 0; i < env.num_cells(); ++i) passable += env.passable(env.cell_at(i)) ? 1 : 0;
  const std::size_t total = passable * aut.num_states() * (static_cast<std::size_t>(clock_bound) + 1);
  if (total > kMaxEnumeratedStates) {
    throw std::length_error("explicit product would have " + std::to_string(total) +
                            " states (limit " + std::to_string(kMaxEnumeratedStates) + ")");
  }

  EnumeratedProduct p;
  p.clock_bound = clock_bound;
  p.actions = env.spec().actions;
  p.cells_ = env.num_cells();
  p.width_ = static_cast<std::size_t>(env.spec().width);
  p.automaton_states_ = aut.num_states();
  p.slot_.assign(p.cells_ * p.automaton_states_ * (clock_bound + 1), SIZE_MAX);
  for (std::size_t ci = 0; ci < env.num_cells(); ++ci) {
    const Cell c = env.cell_at(ci);
    if (!env.passable(c)) continue;
    for (StateId q = 0; q < aut.num_states(); ++q) {
      for (Tick t = 0; t <= clock_bound; ++t) {
        p.slot_[(ci * p.automaton_states_ + q) * (clock_bound + 1) + t] = p.states.size();
        p.states.push_back({c, q, ClockState{t}});
        p.terminal.push_back(aut.is_sink(q));
      }
    }
  }
  p.initial = p.index_of(product.initial());

  const std::size_t na = p.actions.size();
  p.outcomes.assign(p.states.size() * na, {});
  for (std::size_t s = 0; s < p.states.size(); ++s) {
    if (p.terminal[s]) continue;
    const ProductState& st = p.states[s];
    for (std::size_t a = 0; a < na; ++a) {
      const Move m = p.actions[a];
      std::map<std::pair<std::size_t, double>, double> merged;
      for (const auto& w : env.transition(st.cell, m)) {
        ClockState clock{std::min<Tick>(st.clock.value + 1, clock_bound)};
        const LabelMask labels = product.labels(w.value);
        const StepOutcome out = automaton_step(aut, st.automaton_state, labels, clock);
        if (out.cycle_completed) clock.value = 0;
        double r = RewardSpec::sink_reward;
        if (!out.violated) {
          r = (out.entered_accepting.empty() ? 0.0 : reward.accept_reward) +
              (m == Move::Stay ? 0.0 : reward.movement_penalty);
        }
        merged[{p.index_of({w.value, out.next_state, clock}), r}] += w.probability;
      }
      auto& dst = p.outcomes[s * na + a];
      for (const auto& [key, prob] : merged) dst.push_back({key.first, prob, key.second});
    }
  }
  return p;
}

nlohmann::ordered_json to_json(const EnumeratedProduct& p) {
  nlohmann::ordered_json j;
  j["clock_bound"] = p.clock_bound;
  j["actions"] = nlohmann::ordered_json::array();
  for (auto m : p.actions) j["actions"].push_back(std::string(to_string(m)));
  j["initial"] = p.initial;
  j["states"] = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < p.states.size(); ++s) {
    const auto& st = p.states[s];
    j["states"].push_back({{"id", s},
                           {"cell", {st.cell.x, st.cell.y}},
                           {"q", st.automaton_state},
                           {"clock", st.clock.value},
                           {"terminal", static_cast<bool>(p.terminal[s])}});
  }
  j["transitions"] = nlohmann::ordered_json::array();
  const std::size_t na = p.actions.size();
  for (std::size_t s = 0; s < p.states.size(); ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      const auto& outs = p.outcomes[s * na + a];
      if (outs.empty()) continue;
      nlohmann::ordered_json oj = nlohmann::ordered_json::array();
      for (const auto& o : outs) oj.push_back({o.next, o.probability, o.reward});
      j["transitions"].push_back({{"state", s}, {"action", std::string(to_string(p.actions[a]))}, {"outcomes", oj}});
    }
  }
  return j;
}

}  // namespace tsrl
