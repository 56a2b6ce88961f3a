#include "tsrl/qlearning.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>

namespace tsrl {

std::string_view to_string(LearnerMode m) { return m == LearnerMode::Mdp ? "mdp" : "pomdp"; }

LearnerMode learner_mode_from_string(std::string_view name) {
  if (name == "mdp") return LearnerMode::Mdp;
  if (name == "pomdp") return LearnerMode::Pomdp;
  throw std::invalid_argument("unknown mode '" + std::string(name) + "' (expected mdp or pomdp)");
}

// ---------------------------------------------------------------------------
// Keys

namespace {

constexpr unsigned kClockBits = 12;
constexpr unsigned kStateBits = 6;
constexpr unsigned kPayloadShift = kClockBits + kStateBits;
constexpr unsigned kPairBits = 11;
constexpr std::uint64_t kPadObservation = 255;
constexpr std::uint64_t kPadAction = 7;

std::size_t parse_number(std::string_view s) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad number '" + std::string(s) + "' in learner key");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

KeyBuilder::KeyBuilder(LearnerMode mode, std::size_t history, Tick clock_cap)
    : mode_(mode), history_(mode == LearnerMode::Mdp ? 0 : history), clock_cap_(clock_cap) {
  if (mode == LearnerMode::Pomdp && (history == 0 || history > kMaxHistory)) {
    throw std::invalid_argument("history window must be between 1 and 4");
  }
  if (clock_cap > kMaxClockCap) throw std::invalid_argument("clock cap too large for learner keys");
}

std::uint64_t KeyBuilder::pair_bits(std::size_t observation, std::uint64_t action) const {
  if (observation >= kMaxObservations) throw std::invalid_argument("observation id too large");
  return (static_cast<std::uint64_t>(observation) << 3) | action;
}

void KeyBuilder::reset(std::size_t observation) {
  if (mode_ == LearnerMode::Mdp) {
    payload_ = observation;
    return;
  }
  payload_ = 0;
  const std::uint64_t pad = (kPadObservation << 3) | kPadAction;
  for (std::size_t i = 0; i < history_; ++i) payload_ = (payload_ << kPairBits) | pad;
  payload_ = ((payload_ << kPairBits) | pair_bits(observation, kPadAction)) &
             ((std::uint64_t{1} << (kPairBits * history_)) - 1);
}

void KeyBuilder::push(std::size_t observation, Move action) {
  if (mode_ == LearnerMode::Mdp) {
    payload_ = observation;
    return;
  }
  payload_ = ((payload_ << kPairBits) | pair_bits(observation, static_cast<std::uint64_t>(action))) &
             ((std::uint64_t{1} << (kPairBits * history_)) - 1);
}

LearnerKey KeyBuilder::key(StateId automaton_state, ClockState clock) const {
  if (automaton_state >= (std::size_t{1} << kStateBits)) throw std::invalid_argument("automaton too large");
  const std::uint64_t t = std::min(clock.value, clock_cap_);
  return LearnerKey{t | (static_cast<std::uint64_t>(automaton_state) << kClockBits) |
                    (payload_ << kPayloadShift)};
}

std::string KeyBuilder::describe(LearnerKey key) const {
  const std::uint64_t t = key.bits & ((1u << kClockBits) - 1);
  const std::uint64_t q = (key.bits >> kClockBits) & ((1u << kStateBits) - 1);
  const std::uint64_t payload = key.bits >> kPayloadShift;
  std::string out;
  if (mode_ == LearnerMode::Mdp) {
    out = "o=" + std::to_string(payload);
  } else {
    out = "h=";
    for (std::size_t i = 0; i < history_; ++i) {
      const std::uint64_t pair = (payload >> (kPairBits * i)) & ((1u << kPairBits) - 1);
      const std::uint64_t obs = pair >> 3;
      const std::uint64_t act = pair & 7;
      if (i) out += ',';
      out += obs == kPadObservation ? "-" : std::to_string(obs);
      out += '/';
      out += act == kPadAction ? std::string("-") : std::string(to_string(static_cast<Move>(act)));
    }
  }
  return out + "|q=" + std::to_string(q) + "|t=" + std::to_string(t);
}

LearnerKey KeyBuilder::parse(std::string_view text) const {
  const auto parts = split(text, '|');
  if (parts.size() != 3 || parts[1].substr(0, 2) != "q=" || parts[2].substr(0, 2) != "t=") {
    throw std::invalid_argument("malformed learner key '" + std::string(text) + "'");
  }
  const std::uint64_t q = parse_number(parts[1].substr(2));
  const std::uint64_t t = parse_number(parts[2].substr(2));
  std::uint64_t payload = 0;
  if (mode_ == LearnerMode::Mdp) {
    if (parts[0].substr(0, 2) != "o=") throw std::invalid_argument("expected an MDP learner key");
    payload = parse_number(parts[0].substr(2));
  } else {
    if (parts[0].substr(0, 2) != "h=") throw std::invalid_argument("expected a POMDP learner key");
    const auto pairs = split(parts[0].substr(2), ',');
    if (pairs.size() != history_) throw std::invalid_argument("history length mismatch in learner key");
    for (std::size_t i = pairs.size(); i-- > 0;) {
      const auto oa = split(pairs[i], '/');
      if (oa.size() != 2) throw std::invalid_argument("malformed history entry in learner key");
      const std::uint64_t obs = oa[0] == "-" ? kPadObservation : parse_number(oa[0]);
      const std::uint64_t act = oa[1] == "-" ? kPadAction : static_cast<std::uint64_t>(move_from_string(oa[1]));
      payload = (payload << kPairBits) | (obs << 3) | act;
    }
  }
  return LearnerKey{t | (q << kClockBits) | (payload << kPayloadShift)};
}

// ---------------------------------------------------------------------------
// Tables

namespace {
const ActionValues kZeros{};
}

QTable::QTable(std::size_t num_actions, double alpha, double gamma)
    : num_actions_(num_actions), alpha_(alpha), gamma_(gamma) {
  if (num_actions == 0 || num_actions > kZeros.size()) throw std::invalid_argument("bad action count");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0,1]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0,1]");
}

const ActionValues& QTable::values(LearnerKey key) const {
  auto it = eval_.find(key);
  return it == eval_.end() ? kZeros : it->second;
}

const ActionValues& QTable::target_values(LearnerKey key) const {
  auto it = target_.find(key);
  return it == target_.end() ? kZeros : it->second;
}

void QTable::set(LearnerKey key, const ActionValues& v) {
  eval_[key] = v;
  dirty_.insert(key);
}

void QTable::set_target(LearnerKey key, const ActionValues& v) { target_[key] = v; }

double QTable::max_target(LearnerKey key) const {
  const auto& v = target_values(key);
  return *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(num_actions_));
}

double QTable::q_update(LearnerKey key, std::size_t action, double reward, LearnerKey next_key,
                        bool done) {
  const double bootstrap = done ? 0.0 : gamma_ * max_target(next_key);
  auto& v = eval_[key];
  // Convex form of the same update; exact when alpha == 1.
  v[action] = (1.0 - alpha_) * v[action] + alpha_ * (reward + bootstrap);
  dirty_.insert(key);
  return v[action];
}

void QTable::sync_target() {
  for (const auto& k : dirty_) target_[k] = eval_.at(k);
  dirty_.clear();
}

std::size_t QTable::greedy(LearnerKey key) const {
  const auto& v = values(key);
  std::size_t best = 0;
  for (std::size_t a = 1; a < num_actions_; ++a) {
    if (v[a] > v[best]) best = a;
  }
  return best;
}

std::size_t select_action(const QTable& table, LearnerKey key, double epsilon, Rng& rng) {
  if (epsilon > 0.0 && rng.uniform() < epsilon) return rng.below(table.num_actions());
  return table.greedy(key);
}

// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(const Experience& e) {
  if (items_.size() < capacity_) {
    items_.push_back(e);
    return;
  }
  items_[head_] = e;
  head_ = (head_ + 1) % capacity_;
}

const Experience& ReplayBuffer::sample(Rng& rng) const {
  if (items_.empty()) throw std::logic_error("sampling from an empty replay buffer");
  return items_[rng.below(items_.size())];
}

std::vector<Experience> ReplayBuffer::contents() const {
  std::vector<Experience> out;
  out.reserve(items_.size());
  for (std::size_t i = 0; i < items_.size(); ++i) out.push_back(items_[(head_ + i) % items_.size()]);
  return out;
}

// ---------------------------------------------------------------------------

void LearnerParams::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0,1]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0,1]");
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(epsilon_start) || !prob(epsilon_end)) throw std::invalid_argument("epsilon must lie in [0,1]");
  if (!(epsilon_decay_fraction > 0.0 && epsilon_decay_fraction <= 1.0)) {
    throw std::invalid_argument("epsilon_decay_fraction must lie in (0,1]");
  }
  if (sync_period == 0) throw std::invalid_argument("sync_period must be positive");
  if (replay && (replay_capacity == 0 || batch_size == 0)) {
    throw std::invalid_argument("replay needs positive capacity and batch size");
  }
  if (history == 0 || history > KeyBuilder::kMaxHistory) {
    throw std::invalid_argument("history window must be between 1 and 4");
  }
}

double LearnerParams::epsilon_at(std::size_t episode) const {
  const double span = epsilon_decay_fraction * static_cast<double>(episodes);
  if (span <= 0.0 || static_cast<double>(episode) >= span) return epsilon_end;
  const double f = static_cast<double>(episode) / span;
  return epsilon_start + (epsilon_end - epsilon_start) * f;
}

std::vector<double> LearningCurve::moving_average(std::size_t window) const {
  std::vector<double> out(episode_reward.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < episode_reward.size(); ++i) {
    sum += episode_reward[i];
    if (i >= window) sum -= episode_reward[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

std::string LearningCurve::to_csv() const {
  std::string out = "episode,cumulative_reward,moving_avg_100\n";
  const auto avg = moving_average();
  char buf[96];
  for (std::size_t i = 0; i < episode_reward.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f\n", i, episode_reward[i], avg[i]);
    out += buf;
  }
  return out;
}

LearningCurve LearningCurve::from_csv(const std::string& text) {
  LearningCurve c;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line.rfind("episode,cumulative_reward", 0) != 0) throw std::invalid_argument("not a learning curve CSV");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() < 2) throw std::invalid_argument("malformed learning curve row");
    c.episode_reward.push_back(std::stod(std::string(cols[1])));
  }
  return c;
}

// ---------------------------------------------------------------------------

std::size_t agent_observation(const Product& product, LearnerMode mode, Cell cell, std::size_t emitted) {
  return mode == LearnerMode::Mdp ? product.env().index(cell) : emitted;
}

TrainResult train(const Product& product, LearnerMode mode, const LearnerParams& params,
                  std::uint64_t seed, const std::function<bool(std::size_t)>& keep_going) {
  params.validate();
  const auto& env = product.env();
  const auto& actions = env.spec().actions;
  const std::size_t horizon = params.horizon ? params.horizon : product.default_horizon();

  TrainResult result{QTable(actions.size(), params.alpha, params.gamma), {}, 0};
  QTable& table = result.table;
  ReplayBuffer buffer(params.replay ? params.replay_capacity : 1);
  KeyBuilder keys(mode, params.history, product.clock_cap());
  Rng rng(seed);

  auto learn = [&](const Experience& e) {
    if (!params.replay) {
      table.q_update(e.key, e.action, e.reward, e.next_key, e.done);
      return;
    }
    buffer.push(e);
    if (buffer.size() < params.batch_size) return;
    for (std::size_t i = 0; i < params.batch_size; ++i) {
      const Experience& s = buffer.sample(rng);
      table.q_update(s.key, s.action, s.reward, s.next_key, s.done);
    }
  };

  result.curve.episode_reward.reserve(params.episodes);
  for (std::size_t episode = 0; episode < params.episodes; ++episode) {
    if (keep_going && !keep_going(episode)) break;
    const double epsilon = params.epsilon_at(episode);
    ProductState state = product.initial();
    const std::size_t first =
        mode == LearnerMode::Mdp ? env.index(state.cell) : env.observe(state.cell, rng);
    keys.reset(first);
    LearnerKey key = keys.key(state.automaton_state, state.clock);
    double total = 0.0;
    for (std::size_t t = 0; t < horizon; ++t) {
      const std::size_t a = select_action(table, key, epsilon, rng);
      const ProductStepResult r = product.step(state, actions[a], rng);
      keys.push(agent_observation(product, mode, r.next.cell, r.observation), actions[a]);
      const LearnerKey next_key = keys.key(r.next.automaton_state, r.next.clock);
      learn({key, a, r.reward, next_key, r.done});
      if (++result.steps % params.sync_period == 0) table.sync_target();
      total += r.reward;
      state = r.next;
      key = next_key;
      if (r.done) break;
    }
    result.curve.episode_reward.push_back(total);
  }
  return result;
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json qtable_to_json(const QTable& table, const KeyBuilder& keys,
                                      const nlohmann::ordered_json& meta) {
  std::map<std::string, std::vector<double>> sorted;
  for (const auto& [k, v] : table.entries()) {
    sorted.emplace(keys.describe(k), std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(table.num_actions())));
  }
  nlohmann::ordered_json j;
  j["meta"] = meta;
  j["values"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : sorted) j["values"][k] = v;
  return j;
}

QTable qtable_from_json(const nlohmann::json& j, const KeyBuilder& keys, double alpha, double gamma) {
  const auto& values = j.at("values");
  std::size_t n = 0;
  for (const auto& [k, v] : values.items()) {
    n = v.size();
    break;
  }
  if (j.contains("meta") && j.at("meta").contains("actions")) n = j.at("meta").at("actions").size();
  if (n == 0) throw std::invalid_argument("Q-table file has no action count");
  QTable table(n, alpha, gamma);
  for (const auto& [k, v] : values.items()) {
    if (v.size() != n) throw std::invalid_argument("Q-table row '" + k + "' has the wrong width");
    ActionValues row{};
    for (std::size_t a = 0; a < n; ++a) row[a] = v[a].get<double>();
    const LearnerKey key = keys.parse(k);
    table.set(key, row);
    table.set_target(key, row);
  }
  return table;
}

}  // namespace tsrl
