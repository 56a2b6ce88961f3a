// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "oracles/cycle_reset.hpp"
#include "tsrl/config.hpp"
#include "tsrl/evaluation.hpp"

using namespace tsrl;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = TSRL_SOURCE_DIR;
const fs::path kConfigs = kSource / "configs";

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- 1: oracle equivalence -------------------------------------------------

const std::vector<mitl::LabelSet> kSigma{{}, {"a"}, {"b"}, {"a", "b"}};

void for_each_word(std::size_t max_prefix, std::size_t max_cycle,
                   const std::function<void(const mitl::LassoWord&)>& fn) {
  mitl::LassoWord w;
  std::function<void(std::vector<mitl::LabelSet>&, std::size_t, const std::function<void()>&)> fill =
      [&](std::vector<mitl::LabelSet>& part, std::size_t n, const std::function<void()>& then) {
        if (part.size() == n) return then();
        for (const auto& s : kSigma) {
          part.push_back(s);
          fill(part, n, then);
          part.pop_back();
        }
      };
  for (std::size_t p = 0; p <= max_prefix; ++p) {
    for (std::size_t c = 1; c <= max_cycle; ++c) {
      fill(w.prefix, p, [&] { fill(w.cycle, c, [&] { fn(w); }); });
    }
  }
}

Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::pair<std::vector<Stage>, bool>> specs;
  for (Tick l1 = 0; l1 <= 4; ++l1)
    for (Tick u1 = l1; u1 <= 4; ++u1)
      for (Tick l2 = 0; l2 <= 4; ++l2)
        for (Tick u2 = l2; u2 <= 4; ++u2)
          for (bool strict : {false, true})
            specs.push_back({{{"a", Interval::closed(l1, u1)}, {"b", Interval::closed(l2, u2)}}, strict});

  // Every word with prefix <= 3 and cycle <= 3, then seeded samples reaching
  // prefix 10 and cycle 4.
  std::vector<mitl::LassoWord> words;
  for_each_word(3, 3, [&](const mitl::LassoWord& w) { words.push_back(w); });
  const std::size_t exhaustive = words.size();
  std::mt19937_64 g(20240611);
  for (int i = 0; i < 3000; ++i) {
    mitl::LassoWord w;
    for (auto n = g() % 11; n > 0; --n) w.prefix.push_back(kSigma[g() % 4]);
    for (auto n = 1 + g() % 4; n > 0; --n) w.cycle.push_back(kSigma[g() % 4]);
    words.push_back(std::move(w));
  }

  std::size_t checks = 0, mismatches = 0, holds = 0;
  std::string first;
  for (const auto& [stages, strict] : specs) {
    const auto aut = build_recurrence_automaton(stages, {strict});
    const auto cand = oracle::cycle_candidates(stages, strict);
    for (const auto& w : words) {
      const bool want = oracle::cycle_reset_holds(cand, w);
      const bool got = !run_lasso(aut, w).violated;
      ++checks;
      holds += want;
      if (want != got && mismatches++ == 0) {
        std::ostringstream os;
        os << " first mismatch: [" << stages[0].window.lower << "," << *stages[0].window.upper << "] ["
           << stages[1].window.lower << "," << *stages[1].window.upper << "] strict=" << strict;
        first = os.str();
      }
    }
  }
  const double dt = seconds_since(t0);
  return {mismatches == 0 && holds > 0 && dt < 120.0,
          fmt("%zu specs x %zu words (%zu exhaustive), %zu checks, %zu satisfied, %zu mismatches, %.1fs",
              specs.size(), words.size(), exhaustive, checks, holds, mismatches, dt) +
              first};
}

// ---- shared training -------------------------------------------------------

struct Trained {
  RunConfig cfg;
  std::unique_ptr<Instance> inst;
  TrainResult result;
  KeyBuilder keys;
  double seconds;

  EvalReport evaluate(const Instance& where, std::size_t n, std::vector<EpisodeTrace>* traces = nullptr) const {
    GreedyPolicy policy(result.table, keys);
    const std::uint64_t seed = cfg.seeds.front();
    return success_rate(where.product, cfg.mode, policy, where.horizon(cfg), n, derive_seed(seed, 0x6576616c),
                        traces);
  }
};

Trained train_config(const std::string& name, std::optional<bool> deterministic = std::nullopt) {
  RunConfig cfg = load_config(kConfigs / name);
  if (deterministic) cfg.deterministic = *deterministic;
  auto inst = instantiate(cfg);
  LearnerParams params = cfg.learner;
  params.horizon = inst->horizon(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult res = train(inst->product, cfg.mode, params, cfg.seeds.front());
  const double dt = seconds_since(t0);
  KeyBuilder keys(cfg.mode, cfg.learner.history, inst->product.clock_cap());
  return {std::move(cfg), std::move(inst), std::move(res), std::move(keys), dt};
}

// True when every first accepting entry for `stage` in the traces lies in [lo, hi].
bool clocks_within(const std::vector<EpisodeTrace>& traces, std::size_t stage, Tick lo, std::optional<Tick> hi,
                   bool successful_only = false) {
  for (const auto& t : traces) {
    if (successful_only && !t.success()) continue;
    for (const auto& s : t.steps) {
      for (auto k : s.accepting) {
        if (k == stage && (s.clock < lo || (hi && s.clock > *hi))) return false;
      }
    }
  }
  return true;
}

// ---- 2, 3: case 1 ----------------------------------------------------------

Outcome case1_deterministic() {
  const auto t = train_config("case1.json", true);
  std::vector<EpisodeTrace> traces;
  const auto rep = t.evaluate(*t.inst, 100, &traces);
  const bool a_ok = clocks_within(traces, 0, 5, 10);
  const bool b_ok = clocks_within(traces, 1, 15, 20);
  return {rep.success_rate == 1.0 && a_ok && b_ok && t.seconds < 300.0,
          fmt("success %.3f over 100, a-clocks in [5,10]: %s, b-clocks in [15,20]: %s, training %.1fs",
              rep.success_rate, a_ok ? "yes" : "no", b_ok ? "yes" : "no", t.seconds)};
}

Outcome case1_penalty() {
  const auto plain = train_config("case1.json");
  const auto penalised = train_config("case1_penalty.json");
  const auto det = instantiate(penalised.cfg, true);
  const auto det_rep = penalised.evaluate(*det, 100);
  const auto noisy_pen = penalised.evaluate(*penalised.inst, 100);
  const auto noisy_plain = plain.evaluate(*plain.inst, 100);
  const bool fewer = noisy_pen.mean_moves_per_cycle < noisy_plain.mean_moves_per_cycle;
  return {det_rep.success_rate == 1.0 && fewer && noisy_pen.mean_cycles > 0 && noisy_plain.mean_cycles > 0,
          fmt("deterministic success %.3f; moves per cycle %.2f with penalty vs %.2f without "
              "(stochastic success %.3f vs %.3f)",
              det_rep.success_rate, noisy_pen.mean_moves_per_cycle, noisy_plain.mean_moves_per_cycle,
              noisy_pen.success_rate, noisy_plain.success_rate)};
}

// ---- 4, 5: POMDP cases -----------------------------------------------------

Outcome case2() {
  const auto t = train_config("case2.json");
  const auto rep = t.evaluate(*t.inst, 1000);
  return {rep.success_rate >= 0.85 && rep.success_rate <= 0.95 && t.seconds < 600.0,
          fmt("success %.3f [%.3f, %.3f] over 1000, wanted [0.85, 0.95]; training %.1fs (%zu episodes, history %zu)",
              rep.success_rate, rep.wilson_low, rep.wilson_high, t.seconds, t.cfg.learner.episodes,
              t.cfg.learner.history)};
}

Outcome case3() {
  const auto t = train_config("case3.json");
  std::vector<EpisodeTrace> traces;
  const auto rep = t.evaluate(*t.inst, 1000, &traces);
  const bool print_ok = clocks_within(traces, 0, 5, std::nullopt, true);
  const bool a_ok = clocks_within(traces, 1, 10, std::nullopt, true);

  const auto& env = t.inst->env;
  auto cell_of = [&](const std::string& p) {
    for (const auto& [c, ls] : env.spec().labels)
      if (ls.count(p)) return c;
    throw std::runtime_error("office map lacks " + p);
  };
  // Every passable office cell emits one fixed feature tuple.
  auto obs_of = [&](const std::string& p) { return env.observation_distribution(cell_of(p)).front().value; };
  const bool alias = obs_of("b") == obs_of("c") && env.describe_observation(obs_of("b")) == "(wall,wall,wall,door)";
  const std::size_t nobs = env.num_observations();
  return {rep.success_rate >= 0.9 && print_ok && a_ok && nobs == 13 && alias,
          fmt("success %.3f over 1000; Print clocks >= 5: %s; a clocks >= 10: %s; %zu observations; "
              "o(b) = o(c) = (wall,wall,wall,door): %s; training %.1fs",
              rep.success_rate, print_ok ? "yes" : "no", a_ok ? "yes" : "no", nobs, alias ? "yes" : "no",
              t.seconds)};
}

// ---- 6: toy optimality gap -------------------------------------------------

Outcome toy_gap() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto t = train_config("toy.json");
  const double gamma = t.cfg.learner.gamma;
  const auto& aut = t.inst->automaton;
  const auto ep = enumerate_product(t.inst->env, aut, t.cfg.reward, aut.max_finite_bound() + 2);
  const auto vi = value_iteration(ep, gamma, 1e-10);
  const double optimum = vi.values[ep.initial];

  GreedyPolicy policy(t.result.table, t.keys);
  const std::size_t n = 10000;
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = discounted_return(rollout(t.inst->product, t.cfg.mode, policy, 400, derive_seed(99, i)), gamma);
    sum += g;
    sq += g * g;
  }
  const double mc = sum / n;
  const double se = std::sqrt((sq / n - mc * mc) / n);
  const double gap = std::abs(mc - optimum) / optimum;
  const double dt = seconds_since(t0);
  return {gap <= 0.05 && dt < 60.0,
          fmt("Monte-Carlo %.3f (SE %.3f, 1e4 episodes) vs value iteration %.3f (gap %.2f%%, %zu product states), %.1fs",
              mc, se, optimum, 100.0 * gap, ep.states.size(), dt)};
}

// ---- 7: q_update arithmetic -------------------------------------------------

Outcome q_arithmetic() {
  QTable t1(4, 0.1, 0.9);
  const double v1 = t1.q_update(LearnerKey{1}, 0, 100.0, LearnerKey{2}, false);

  QTable t2(4, 0.5, 0.9);
  t2.set(LearnerKey{1}, {0, 10.0, 0, 0, 0});
  t2.set_target(LearnerKey{2}, {50.0, 3.0, -1.0, 0, 0});
  const double v2 = t2.q_update(LearnerKey{1}, 1, 0.0, LearnerKey{2}, false);

  QTable t3(4, 1.0, 0.9);
  t3.set(LearnerKey{1}, {-37.25, 0, 0, 0, 0});
  t3.set_target(LearnerKey{2}, {1e6, 0, 0, 0, 0});
  const double v3 = t3.q_update(LearnerKey{1}, 0, 100.0, LearnerKey{2}, true);

  return {v1 == 10.0 && v2 == 27.5 && v3 == 100.0, fmt("%.17g, %.17g, %.17g (want 10, 27.5, 100)", v1, v2, v3)};
}

// ---- 8: normalization -------------------------------------------------------

Outcome normalization() {
  std::size_t dists = 0, bad_sum = 0, empirical = 0, outside = 0;
  double worst_z = 0.0;
  Rng rng(8);
  for (const char* name : {"grid5.json", "grid10.json", "office.json", "toy3.json"}) {
    const auto env = load_map(kSource / "data/maps" / name);
    const auto& sp = env.spec();
    std::vector<Cell> probes;
    for (int y = 0; y < sp.height; ++y) {
      for (int x = 0; x < sp.width; ++x) {
        const Cell c{x, y};
        if (!env.passable(c)) continue;
        double total = 0.0;
        for (const auto& o : env.observation_distribution(c)) total += o.probability;
        ++dists;
        bad_sum += std::abs(total - 1.0) > 1e-12;
        for (Move m : sp.actions) {
          total = 0.0;
          for (const auto& o : env.transition(c, m)) total += o.probability;
          ++dists;
          bad_sum += std::abs(total - 1.0) > 1e-12;
        }
        const bool corner = (x == 0 || x == sp.width - 1) && (y == 0 || y == sp.height - 1);
        if (corner || c == sp.start || c == Cell{sp.width / 2, sp.height / 2}) probes.push_back(c);
      }
    }

    // Sampled frequencies against the analytic probabilities.
    auto compare = [&](const auto& dist, const auto& draw) {
      const std::size_t n = 100000;
      std::map<decltype(dist.front().value), std::size_t> counts;
      for (std::size_t i = 0; i < n; ++i) ++counts[draw()];
      for (const auto& o : dist) {
        const double p = o.probability;
        const double se = std::sqrt(p * (1 - p) / n);
        const double f = static_cast<double>(counts[o.value]) / n;
        const double z = se > 0 ? std::abs(f - p) / se : (f == p ? 0.0 : 1e9);
        worst_z = std::max(worst_z, z);
        ++empirical;
        outside += z > 3.0;
      }
    };
    for (const Cell c : probes) {
      for (Move m : sp.actions) {
        const auto dist = env.transition(c, m);
        compare(dist, [&] { return env.step(c, m, rng); });
      }
      compare(env.observation_distribution(c), [&] { return env.observe(c, rng); });
    }
  }
  // At 3 standard errors about 0.27% of honest comparisons land outside.
  const std::size_t allowed = static_cast<std::size_t>(std::ceil(0.0027 * empirical)) + 1;
  return {bad_sum == 0 && outside <= allowed,
          fmt("%zu analytic distributions, %zu off one; %zu sampled probabilities (1e5 draws each), %zu beyond "
              "3 SE (allowed %zu), worst z %.2f",
              dists, bad_sum, empirical, outside, allowed, worst_z)};
}

// ---- 9: reproducibility ----------------------------------------------------

Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / "tsrl_acceptance_repro";
  fs::remove_all(root);
  std::size_t compared = 0, differing = 0;
  std::string detail;
  for (const char* name : {"case1.json", "case1_penalty.json", "case2.json", "case3.json", "toy.json"}) {
    const RunConfig cfg = load_config(kConfigs / name);
    std::string files[2][2];
    for (int run = 0; run < 2; ++run) {
      const fs::path out = root / std::to_string(run);
      const std::string cmd = std::string("\"") + TSRL_CLI + "\" train --config \"" + (kConfigs / name).string() +
                              "\" --out \"" + out.string() +
                              "\" > /dev/null";
      if (std::system(cmd.c_str()) != 0) return {false, std::string("train failed for ") + name};
      const fs::path dir = out / config_hash(cfg) / std::to_string(cfg.seeds.front());
      files[run][0] = read_text(dir / "qtable.json");
      files[run][1] = read_text(dir / "curve.csv");
    }
    for (int k = 0; k < 2; ++k) {
      ++compared;
      if (files[0][k] != files[1][k]) {
        ++differing;
        detail += std::string(" ") + name + (k ? "/curve.csv" : "/qtable.json");
      }
    }
  }
  fs::remove_all(root);
  return {differing == 0, fmt("%zu file pairs compared, %zu differ", compared, differing) +
                              detail};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional argument: comma-separated criterion numbers to run.
  std::set<int> only;
  if (argc > 1) {
    std::stringstream ss(argv[1]);
    std::string item;
    while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
  }
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
      {"oracle equivalence", oracle_equivalence},
      {"case 1 deterministic", case1_deterministic},
      {"case 1 movement penalty", case1_penalty},
      {"case 2 POMDP success band", case2},
      {"case 3 office", case3},
      {"toy optimality gap", toy_gap},
      {"q_update arithmetic", q_arithmetic},
      {"normalization", normalization},
      {"reproducibility", reproducibility},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
