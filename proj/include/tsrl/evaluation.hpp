#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsrl/product.hpp"
#include "tsrl/qlearning.hpp"

namespace tsrl {

// A policy sees the automaton state and clock (both always known) plus the
// agent observation; what it does with them is up to the policy.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void begin(const ProductState& state, std::size_t observation) = 0;
  // Returns an index into the environment's action list.
  virtual std::size_t choose(const ProductState& state, Rng& rng) = 0;
  virtual void record(const ProductState& next, std::size_t observation, Move action) = 0;
};

class GreedyPolicy : public Policy {
 public:
  GreedyPolicy(const QTable& table, KeyBuilder keys, double epsilon = 0.0)
      : table_(&table), keys_(std::move(keys)), epsilon_(epsilon) {}
  void begin(const ProductState&, std::size_t observation) override { keys_.reset(observation); }
  std::size_t choose(const ProductState& s, Rng& rng) override {
    return select_action(*table_, keys_.key(s.automaton_state, s.clock), epsilon_, rng);
  }
  void record(const ProductState&, std::size_t observation, Move action) override {
    keys_.push(observation, action);
  }

 private:
  const QTable* table_;
  KeyBuilder keys_;
  double epsilon_;
};

// Plays a fixed move list, then `after` forever.
class ScriptedPolicy : public Policy {
 public:
  ScriptedPolicy(const GridWorld& env, std::vector<Move> script, Move after = Move::Stay);
  void begin(const ProductState&, std::size_t) override { t_ = 0; }
  std::size_t choose(const ProductState&, Rng&) override;
  void record(const ProductState&, std::size_t, Move) override { ++t_; }

 private:
  std::vector<std::size_t> script_;
  std::size_t after_;
  std::size_t t_ = 0;
};

class UniformRandomPolicy : public Policy {
 public:
  explicit UniformRandomPolicy(std::size_t num_actions) : n_(num_actions) {}
  void begin(const ProductState&, std::size_t) override {}
  std::size_t choose(const ProductState&, Rng& rng) override { return rng.below(n_); }
  void record(const ProductState&, std::size_t, Move) override {}

 private:
  std::size_t n_;
};

// Looks the full product state up in an enumerated product (e.g. the greedy
// policy from value iteration).
class StateTablePolicy : public Policy {
 public:
  StateTablePolicy(const EnumeratedProduct& product, std::vector<std::size_t> actions)
      : product_(&product), actions_(std::move(actions)) {}
  void begin(const ProductState&, std::size_t) override {}
  std::size_t choose(const ProductState& s, Rng&) override { return actions_.at(product_->index_of(s)); }
  void record(const ProductState&, std::size_t, Move) override {}

 private:
  const EnumeratedProduct* product_;
  std::vector<std::size_t> actions_;
};

struct TraceStep {
  std::size_t time = 0;  // 1-based step number
  Move action = Move::Stay;
  Cell cell;             // cell after the step
  std::size_t observation = 0;
  LabelMask labels = 0;
  StateId automaton_state = 0;  // after the step
  Tick clock = 0;               // clock value the automaton read on this step
  double reward = 0.0;
  std::vector<std::size_t> accepting;
  bool cycle_completed = false;
  bool violated = false;
};

enum class TerminalStatus { Sink, Horizon };
std::string_view to_string(TerminalStatus s);

struct EpisodeTrace {
  std::uint64_t seed = 0;
  ProductState initial;
  std::size_t initial_observation = 0;
  std::vector<TraceStep> steps;
  TerminalStatus status = TerminalStatus::Horizon;
  std::size_t cycles_completed = 0;

  double total_reward() const;
  bool success() const { return status == TerminalStatus::Horizon && cycles_completed >= 1; }
  // Non-stay moves up to and including the step that completed the last cycle.
  std::size_t moves_in_completed_cycles() const;
};

// Observation handed to the policy at episode start: the cell index under
// MDP learning, a sampled observation otherwise.
std::size_t initial_observation(const Product& product, LearnerMode mode, Rng& rng);

EpisodeTrace rollout(const Product& product, LearnerMode mode, Policy& policy, std::size_t horizon,
                     std::uint64_t seed);

struct EvalReport {
  std::size_t n_episodes = 0;
  std::size_t successes = 0;
  std::size_t sink_episodes = 0;
  double success_rate = 0.0;
  double wilson_low = 0.0;
  double wilson_high = 0.0;
  double mean_cycles = 0.0;
  double mean_reward = 0.0;
  // Total non-stay moves inside completed cycles over total completed cycles;
  // 0 when no cycle completed.
  double mean_moves_per_cycle = 0.0;
  std::size_t horizon = 0;
  // Per stage: clock value at the first accepting entry of each episode.
  std::vector<std::map<Tick, std::size_t>> first_visit_clocks;
};

struct WilsonInterval {
  double low;
  double high;
};
WilsonInterval wilson_interval(std::size_t successes, std::size_t n, double z = 1.959963984540054);

// Runs n rollouts with seeds derive_seed(seed, i). If `traces` is given the
// individual traces are appended to it.
EvalReport success_rate(const Product& product, LearnerMode mode, Policy& policy, std::size_t horizon,
                        std::size_t n, std::uint64_t seed, std::vector<EpisodeTrace>* traces = nullptr);

struct ValueIterationResult {
  std::vector<double> values;
  std::vector<std::size_t> policy;  // action index per product state
  std::size_t sweeps = 0;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ValueIterationResult value_iteration(const EnumeratedProduct& product, double gamma, double tolerance,
                                     std::size_t max_sweeps = 100000);

// Discounted return of a single trace.
double discounted_return(const EpisodeTrace& trace, double gamma);

// Export. JSONL: a header object (seed, config hash, status, cycles) followed
// by one object per step.
std::string trace_to_jsonl(const EpisodeTrace& trace, const GridWorld& env, const std::string& config_hash);
std::string trace_to_csv(const EpisodeTrace& trace);
// Rewards column of a trace CSV.
std::vector<double> trace_rewards_from_csv(const std::string& text);
nlohmann::ordered_json report_to_json(const EvalReport& report, const TimedLdgba& aut);

// Writes text to path, creating parent directories; throws with the path in
// the message on failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace tsrl
