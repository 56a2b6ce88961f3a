#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsrl/product.hpp"
#include "tsrl/random.hpp"

namespace tsrl {

enum class LearnerMode { Mdp, Pomdp };
std::string_view to_string(LearnerMode m);
LearnerMode learner_mode_from_string(std::string_view name);

// Packed learner key: clock in bits 0..11, automaton state in 12..17, then
// either the cell index (MDP) or a window of (observation, action) pairs
// (POMDP, 11 bits per pair, most recent pair lowest).
struct LearnerKey {
  std::uint64_t bits = 0;
  friend auto operator<=>(const LearnerKey&, const LearnerKey&) = default;
};

struct LearnerKeyHash {
  std::size_t operator()(LearnerKey k) const noexcept {
    std::uint64_t z = k.bits * 0x9E3779B97F4A7C15ULL;
    return static_cast<std::size_t>(z ^ (z >> 29));
  }
};

// Tracks what the agent has seen in the current episode and turns it into a
// learner key. In POMDP mode the last `history` (observation, action) pairs
// stand in for a recurrent summary of the observation history.
class KeyBuilder {
 public:
  static constexpr std::size_t kMaxHistory = 4;
  static constexpr std::size_t kMaxObservations = 255;
  static constexpr Tick kMaxClockCap = 4095;

  KeyBuilder(LearnerMode mode, std::size_t history, Tick clock_cap);

  // Start of an episode; the initial observation has no preceding action.
  void reset(std::size_t observation);
  void push(std::size_t observation, Move action);
  LearnerKey key(StateId automaton_state, ClockState clock) const;

  std::string describe(LearnerKey key) const;
  LearnerKey parse(std::string_view text) const;

  LearnerMode mode() const { return mode_; }
  std::size_t history() const { return history_; }
  Tick clock_cap() const { return clock_cap_; }

 private:
  std::uint64_t pair_bits(std::size_t observation, std::uint64_t action) const;

  LearnerMode mode_;
  std::size_t history_;
  Tick clock_cap_;
  std::uint64_t payload_ = 0;
};

using ActionValues = std::array<double, 5>;

// Evaluation and target tables. Unseen keys read as all zeros.
class QTable {
 public:
  QTable(std::size_t num_actions, double alpha, double gamma);

  std::size_t num_actions() const { return num_actions_; }
  double alpha() const { return alpha_; }
  double gamma() const { return gamma_; }

  const ActionValues& values(LearnerKey key) const;
  const ActionValues& target_values(LearnerKey key) const;
  void set(LearnerKey key, const ActionValues& v);
  void set_target(LearnerKey key, const ActionValues& v);

  // Q_e(k,a) += alpha * (r + gamma * max_a' Q_t(k',a') - Q_e(k,a)); the
  // bootstrap term is dropped when done. Returns the new value.
  double q_update(LearnerKey key, std::size_t action, double reward, LearnerKey next_key, bool done);

  // Copies every evaluation entry written since the last sync.
  void sync_target();

  // Lowest index among the maximal evaluation values.
  std::size_t greedy(LearnerKey key) const;
  double max_target(LearnerKey key) const;

  std::size_t size() const { return eval_.size(); }
  const std::unordered_map<LearnerKey, ActionValues, LearnerKeyHash>& entries() const { return eval_; }

 private:
  std::size_t num_actions_;
  double alpha_;
  double gamma_;
  std::unordered_map<LearnerKey, ActionValues, LearnerKeyHash> eval_;
  std::unordered_map<LearnerKey, ActionValues, LearnerKeyHash> target_;
  std::unordered_set<LearnerKey, LearnerKeyHash> dirty_;
};

std::size_t select_action(const QTable& table, LearnerKey key, double epsilon, Rng& rng);

struct Experience {
  LearnerKey key;
  std::size_t action = 0;
  double reward = 0.0;
  LearnerKey next_key;
  bool done = false;
};

// Fixed-capacity FIFO with uniform sampling (with replacement).
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void push(const Experience& e);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Experience& sample(Rng& rng) const;
  // Oldest first.
  std::vector<Experience> contents() const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next slot to overwrite once full
  std::vector<Experience> items_;
};

struct LearnerParams {
  double alpha = 0.1;
  double gamma = 0.95;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  // Fraction of the episodes over which epsilon decays linearly.
  double epsilon_decay_fraction = 0.7;
  std::size_t episodes = 20000;
  std::size_t sync_period = 500;
  bool replay = false;
  std::size_t replay_capacity = 50000;
  std::size_t batch_size = 32;
  std::size_t history = 1;
  // 0 selects the product's default horizon.
  std::size_t horizon = 0;

  void validate() const;
  double epsilon_at(std::size_t episode) const;
};

struct LearningCurve {
  std::vector<double> episode_reward;

  // Trailing mean over the last (up to) 100 episodes.
  std::vector<double> moving_average(std::size_t window = 100) const;
  std::string to_csv() const;
  static LearningCurve from_csv(const std::string& text);
};

struct TrainResult {
  QTable table;
  LearningCurve curve;
  std::size_t steps = 0;
};

// Learner view of the product: what the agent observes after each step.
std::size_t agent_observation(const Product& product, LearnerMode mode, Cell cell,
                              std::size_t emitted);

TrainResult train(const Product& product, LearnerMode mode, const LearnerParams& params,
                  std::uint64_t seed, const std::function<bool(std::size_t)>& keep_going = {});

// Sorted key -> values JSON; `meta` is stored verbatim.
nlohmann::ordered_json qtable_to_json(const QTable& table, const KeyBuilder& keys,
                                      const nlohmann::ordered_json& meta);
QTable qtable_from_json(const nlohmann::json& j, const KeyBuilder& keys, double alpha, double gamma);

}  // namespace tsrl
