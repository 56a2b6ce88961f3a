#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsrl/automaton.hpp"
#include "tsrl/grid.hpp"
#include "tsrl/random.hpp"

namespace tsrl {

struct RewardSpec {
  double accept_reward = 100.0;
  // Added for every move other than stay; zero or negative.
  double movement_penalty = 0.0;
  static constexpr double sink_reward = 0.0;

  void validate() const;
};

struct ProductState {
  Cell cell;
  StateId automaton_state = 0;
  ClockState clock;
  friend bool operator==(const ProductState&, const ProductState&) = default;
};

// Follows one epsilon edge of the automaton without moving in the world.
struct EpsilonMove {
  StateId target = 0;
};

using ProductAction = std::variant<Move, EpsilonMove>;

struct ProductStepResult {
  ProductState next;
  std::size_t observation = 0;
  LabelMask labels = 0;
  double reward = 0.0;
  bool done = false;
  std::vector<std::size_t> accepting_entered;
  bool cycle_completed = false;
};

class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Environment and automaton synchronized on the fly. Holds references; both
// must outlive the product.
class Product {
 public:
  Product(const GridWorld& env, const TimedLdgba& aut, RewardSpec reward);

  const GridWorld& env() const { return *env_; }
  const TimedLdgba& automaton() const { return *aut_; }
  const RewardSpec& reward_spec() const { return reward_; }

  ProductState initial() const;
  LabelMask labels(Cell c) const { return label_masks_[env_->index(c)]; }

  ProductStepResult step(const ProductState& state, ProductAction action, Rng& rng) const;

  // Episode truncation default: 3x the sum of finite upper bounds, at least 60.
  std::size_t default_horizon() const;
  // Clock cap for learner keys: larger clock values are indistinguishable.
  Tick clock_cap() const { return aut_->max_finite_bound() + 1; }

 private:
  const GridWorld* env_;
  const TimedLdgba* aut_;
  RewardSpec reward_;
  std::vector<LabelMask> label_masks_;
};

ProductStepResult product_step(const GridWorld& env, const TimedLdgba& aut, const ProductState& state,
                               ProductAction action, const RewardSpec& reward, Rng& rng);

struct ProductOutcome {
  std::size_t next = 0;
  double probability = 0.0;
  double reward = 0.0;
};

// Explicit product over passable cells x automaton states x clock values
// 0..clock_bound, with clocks saturating at clock_bound.
struct EnumeratedProduct {
  std::vector<ProductState> states;
  std::vector<Move> actions;
  std::size_t initial = 0;
  std::vector<bool> terminal;  // sink states
  // outcomes[state * actions.size() + action]; empty for terminal states.
  std::vector<std::vector<ProductOutcome>> outcomes;
  Tick clock_bound = 0;

  std::size_t index_of(const ProductState& s) const;

 private:
  friend EnumeratedProduct enumerate_product(const GridWorld&, const TimedLdgba&, const RewardSpec&,
                                             Tick);
  std::size_t cells_ = 0, automaton_states_ = 0, width_ = 0;
  std::vector<std::size_t> slot_;  // dense (cell, q, clock) -> state index or npos
};

inline constexpr std::size_t kMaxEnumeratedStates = 1'000'000;

EnumeratedProduct enumerate_product(const GridWorld& env, const TimedLdgba& aut,
                                    const RewardSpec& reward, Tick clock_bound);
nlohmann::ordered_json to_json(const EnumeratedProduct& product);

}  // namespace tsrl
