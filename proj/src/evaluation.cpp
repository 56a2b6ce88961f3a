#include "tsrl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace tsrl {

std::string_view to_string(TerminalStatus s) { return s == TerminalStatus::Sink ? "sink" : "horizon"; }

ScriptedPolicy::ScriptedPolicy(const GridWorld& env, std::vector<Move> script, Move after)
    : after_(env.action_index(after)) {
  script_.reserve(script.size());
  for (Move m : script) script_.push_back(env.action_index(m));
}

std::size_t ScriptedPolicy::choose(const ProductState&, Rng&) {
  return t_ < script_.size() ? script_[t_] : after_;
}

double EpisodeTrace::total_reward() const {
  double sum = 0.0;
  for (const auto& s : steps) sum += s.reward;
  return sum;
}

std::size_t EpisodeTrace::moves_in_completed_cycles() const {
  std::size_t moves = 0, counted = 0;
  for (const auto& s : steps) {
    if (s.action != Move::Stay) ++moves;
    if (s.cycle_completed) counted = moves;
  }
  return counted;
}

std::size_t initial_observation(const Product& product, LearnerMode mode, Rng& rng) {
  const Cell start = product.initial().cell;
  return mode == LearnerMode::Mdp ? product.env().index(start) : product.env().observe(start, rng);
}

EpisodeTrace rollout(const Product& product, LearnerMode mode, Policy& policy, std::size_t horizon,
                     std::uint64_t seed) {
  Rng rng(seed);
  const auto& actions = product.env().spec().actions;
  const auto& aut = product.automaton();
  EpisodeTrace trace;
  trace.seed = seed;
  trace.initial = product.initial();
  trace.initial_observation = initial_observation(product, mode, rng);
  policy.begin(trace.initial, trace.initial_observation);

  ProductState state = trace.initial;
  for (std::size_t t = 0; t < horizon; ++t) {
    const std::size_t a = policy.choose(state, rng);
    const Move move = actions.at(a);
    const ProductStepResult r = product.step(state, move, rng);
    TraceStep step;
    step.time = t + 1;
    step.action = move;
    step.cell = r.next.cell;
    step.observation = agent_observation(product, mode, r.next.cell, r.observation);
    step.labels = r.labels;
    step.automaton_state = r.next.automaton_state;
    step.clock = state.clock.value + 1;
    step.reward = r.reward;
    step.accepting = r.accepting_entered;
    step.cycle_completed = r.cycle_completed;
    step.violated = aut.is_sink(r.next.automaton_state);
    if (r.cycle_completed) ++trace.cycles_completed;
    trace.steps.push_back(std::move(step));
    policy.record(r.next, trace.steps.back().observation, move);
    state = r.next;
    if (r.done) {
      trace.status = TerminalStatus::Sink;
      break;
    }
  }
  return trace;
}

WilsonInterval wilson_interval(std::size_t successes, std::size_t n, double z) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

EvalReport success_rate(const Product& product, LearnerMode mode, Policy& policy, std::size_t horizon,
                        std::size_t n, std::uint64_t seed, std::vector<EpisodeTrace>* traces) {
  if (n == 0) throw std::invalid_argument("need at least one evaluation episode");
  EvalReport rep;
  rep.n_episodes = n;
  rep.horizon = horizon;
  rep.first_visit_clocks.resize(product.automaton().accepting_sets().size());
  double cycles = 0.0, reward = 0.0;
  std::size_t moves = 0, counted_cycles = 0;
  for (std::size_t i = 0; i < n; ++i) {
    EpisodeTrace tr = rollout(product, mode, policy, horizon, derive_seed(seed, i));
    if (tr.success()) ++rep.successes;
    if (tr.status == TerminalStatus::Sink) ++rep.sink_episodes;
    cycles += static_cast<double>(tr.cycles_completed);
    reward += tr.total_reward();
    moves += tr.moves_in_completed_cycles();
    counted_cycles += tr.cycles_completed;
    std::vector<bool> seen(rep.first_visit_clocks.size(), false);
    for (const auto& s : tr.steps) {
      for (std::size_t k : s.accepting) {
        if (!seen[k]) {
          seen[k] = true;
          ++rep.first_visit_clocks[k][s.clock];
        }
      }
    }
    if (traces) traces->push_back(std::move(tr));
  }
  const double nn = static_cast<double>(n);
  rep.success_rate = static_cast<double>(rep.successes) / nn;
  const auto w = wilson_interval(rep.successes, n);
  rep.wilson_low = w.low;
  rep.wilson_high = w.high;
  rep.mean_cycles = cycles / nn;
  rep.mean_reward = reward / nn;
  rep.mean_moves_per_cycle =
      counted_cycles ? static_cast<double>(moves) / static_cast<double>(counted_cycles) : 0.0;
  return rep;
}

ValueIterationResult value_iteration(const EnumeratedProduct& p, double gamma, double tolerance,
                                     std::size_t max_sweeps) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("value iteration needs 0 <= gamma < 1");
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  const std::size_t ns = p.states.size(), na = p.actions.size();
  ValueIterationResult res;
  res.values.assign(ns, 0.0);
  res.policy.assign(ns, 0);
  std::vector<double> next(ns, 0.0);

  auto q_value = [&](std::size_t s, std::size_t a, const std::vector<double>& v) {
    double q = 0.0;
    for (const auto& o : p.outcomes[s * na + a]) q += o.probability * (o.reward + gamma * v[o.next]);
    return q;
  };

  while (true) {
    if (res.sweeps >= max_sweeps) {
      throw ConvergenceError("value iteration did not converge within " + std::to_string(max_sweeps) +
                             " sweeps");
    }
    ++res.sweeps;
    double delta = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
      if (p.terminal[s]) {
        next[s] = 0.0;
        continue;
      }
      double best = q_value(s, 0, res.values);
      for (std::size_t a = 1; a < na; ++a) best = std::max(best, q_value(s, a, res.values));
      next[s] = best;
      delta = std::max(delta, std::abs(best - res.values[s]));
    }
    res.values.swap(next);
    if (delta < tolerance) break;
  }

  for (std::size_t s = 0; s < ns; ++s) {
    if (p.terminal[s]) continue;
    double best = q_value(s, 0, res.values);
    for (std::size_t a = 1; a < na; ++a) {
      const double q = q_value(s, a, res.values);
      if (q > best + 1e-12) {
        best = q;
        res.policy[s] = a;
      }
    }
  }
  return res;
}

double discounted_return(const EpisodeTrace& trace, double gamma) {
  double g = 0.0, w = 1.0;
  for (const auto& s : trace.steps) {
    g += w * s.reward;
    w *= gamma;
  }
  return g;
}

// ---------------------------------------------------------------------------

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join_indices(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

std::string trace_to_jsonl(const EpisodeTrace& trace, const GridWorld& env, const std::string& config_hash) {
  std::string out;
  nlohmann::ordered_json head;
  head["seed"] = trace.seed;
  head["config_hash"] = config_hash;
  head["status"] = std::string(to_string(trace.status));
  head["cycles_completed"] = trace.cycles_completed;
  head["steps"] = trace.steps.size();
  head["start"] = {trace.initial.cell.x, trace.initial.cell.y};
  head["initial_observation"] = trace.initial_observation;
  out += head.dump() + "\n";
  for (const auto& s : trace.steps) {
    nlohmann::ordered_json j;
    j["t"] = s.time;
    j["action"] = std::string(to_string(s.action));
    j["cell"] = {s.cell.x, s.cell.y};
    j["observation"] = s.observation;
    const auto& labels = env.labels(s.cell);
    j["labels"] = std::vector<std::string>(labels.begin(), labels.end());
    j["q"] = s.automaton_state;
    j["clock"] = s.clock;
    j["reward"] = s.reward;
    j["accepting"] = s.accepting;
    j["cycle_completed"] = s.cycle_completed;
    j["violated"] = s.violated;
    out += j.dump() + "\n";
  }
  return out;
}

std::string trace_to_csv(const EpisodeTrace& trace) {
  std::string out = "t,action,x,y,observation,labels,q,clock,reward,accepting,cycle_completed,violated\n";
  for (const auto& s : trace.steps) {
    out += std::to_string(s.time) + ',' + std::string(to_string(s.action)) + ',' + std::to_string(s.cell.x) +
           ',' + std::to_string(s.cell.y) + ',' + std::to_string(s.observation) + ',' +
           std::to_string(s.labels) + ',' + std::to_string(s.automaton_state) + ',' +
           std::to_string(s.clock) + ',' + fmt_double(s.reward) + ',' + join_indices(s.accepting) + ',' +
           (s.cycle_completed ? "1" : "0") + ',' + (s.violated ? "1" : "0") + '\n';
  }
  return out;
}

std::vector<double> trace_rewards_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,action,", 0) != 0) {
    throw std::invalid_argument("not a trace CSV");
  }
  std::vector<double> rewards;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t start = 0;
    for (int col = 0; col < 8; ++col) {
      start = line.find(',', start);
      if (start == std::string::npos) throw std::invalid_argument("short trace CSV row");
      ++start;
    }
    rewards.push_back(std::stod(line.substr(start, line.find(',', start) - start)));
  }
  return rewards;
}

nlohmann::ordered_json report_to_json(const EvalReport& r, const TimedLdgba& aut) {
  nlohmann::ordered_json j;
  j["n_episodes"] = r.n_episodes;
  j["successes"] = r.successes;
  j["success_rate"] = r.success_rate;
  j["wilson_low"] = r.wilson_low;
  j["wilson_high"] = r.wilson_high;
  j["sink_episodes"] = r.sink_episodes;
  j["mean_cycles"] = r.mean_cycles;
  j["mean_reward"] = r.mean_reward;
  j["mean_moves_per_cycle"] = r.mean_moves_per_cycle;
  j["horizon"] = r.horizon;
  j["first_visit_clocks"] = nlohmann::ordered_json::array();
  const auto& names = aut.definition().state_names;
  for (std::size_t k = 0; k < r.first_visit_clocks.size(); ++k) {
    nlohmann::ordered_json hist = nlohmann::ordered_json::object();
    for (const auto& [clock, count] : r.first_visit_clocks[k]) hist[std::to_string(clock)] = count;
    std::string target;
    for (StateId q : aut.accepting_sets()[k]) target += (target.empty() ? "" : ",") + names.at(q);
    j["first_visit_clocks"].push_back({{"accepting_set", k}, {"states", target}, {"histogram", hist}});
  }
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw std::runtime_error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace tsrl
