// tsrl: parse, compile, train and evaluate time-bounded task specifications.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "tsrl/automaton.hpp"
#include "tsrl/config.hpp"
#include "tsrl/evaluation.hpp"
#include "tsrl/mitl.hpp"
#include "tsrl/product.hpp"
#include "tsrl/qlearning.hpp"

namespace fs = std::filesystem;
using namespace tsrl;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

std::atomic<bool> g_interrupted{false};

// Input the user got wrong (bad formula, bad file, bad config).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n;
  std::optional<std::size_t> episodes;
  bool deterministic = false;
  std::optional<bool> strict_revisit;
  std::string out;
  bool dump_ast = false;
  bool dump_product = false;
  std::string formula;
  std::string word;
  std::string alphabet;
  std::string table;
  std::optional<Tick> clock_bound;
};

fs::path output_root(const Options& o) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv("TSRL_OUT"); env && *env) return env;
  return "runs";
}

RunConfig load(const Options& o) {
  if (o.config.empty()) throw UsageError("--config is required");
  RunConfig cfg;
  try {
    cfg = load_config(o.config);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  } catch (const mitl::ParseError& e) {
    throw UsageError(std::string("formula: ") + e.what());
  } catch (const UnsupportedFragment& e) {
    throw UsageError(std::string("unsupported fragment: ") + e.what());
  }
  if (o.deterministic) cfg.deterministic = true;
  if (o.strict_revisit) cfg.strict_revisit = *o.strict_revisit;
  if (o.episodes) cfg.learner.episodes = *o.episodes;
  return cfg;
}

std::uint64_t seed_of(const Options& o, const RunConfig& cfg) { return o.seed ? *o.seed : cfg.seeds.front(); }

fs::path run_dir(const Options& o, const RunConfig& cfg, std::uint64_t seed) {
  return output_root(o) / config_hash(cfg) / std::to_string(seed);
}

mitl::LabelSet label_set(const nlohmann::json& j) {
  if (!j.is_array()) throw UsageError("word positions must be arrays of proposition names");
  mitl::LabelSet s;
  for (const auto& p : j) s.insert(p.get<std::string>());
  return s;
}

// A JSON lasso {"prefix": [...], "cycle": [...]}, or a trace JSONL file whose
// label sequence is read as a finite prefix. Finite words are padded with an
// empty-label cycle.
mitl::LassoWord load_word(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open word file " + path);
  std::string first;
  std::getline(in, first);
  mitl::LassoWord w;
  try {
    auto head = nlohmann::json::parse(first, nullptr, false);
    if (!head.is_discarded() && head.is_object() && head.contains("config_hash")) {
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        if (j.contains("config_hash")) break;  // next episode
        w.prefix.push_back(label_set(j.at("labels")));
      }
    } else {
      std::stringstream rest;
      rest << first << '\n' << in.rdbuf();
      const auto j = nlohmann::json::parse(rest.str());
      if (!j.is_object()) throw UsageError("word file must hold an object with prefix and cycle");
      for (const auto& p : j.value("prefix", nlohmann::json::array())) w.prefix.push_back(label_set(p));
      for (const auto& p : j.value("cycle", nlohmann::json::array())) w.cycle.push_back(label_set(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("malformed word file " + path + ": " + e.what());
  }
  if (w.cycle.empty()) w.cycle.push_back({});
  return w;
}

mitl::Formula parse_formula(const std::string& text, const std::set<std::string>& alphabet) {
  if (alphabet.empty()) throw UsageError("no propositions known; pass --alphabet");
  try {
    return mitl::parse(text, alphabet);
  } catch (const mitl::ParseError& e) {
    throw UsageError(std::string("formula ") + e.what());
  }
}

std::set<std::string> split_alphabet(const std::string& text) {
  std::set<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.insert(item);
  }
  return out;
}

int cmd_check(const Options& o) {
  std::string formula_text = o.formula;
  std::set<std::string> alphabet = split_alphabet(o.alphabet);
  bool strict = o.strict_revisit.value_or(false);
  if (!o.config.empty()) {
    const RunConfig cfg = load(o);
    if (formula_text.empty()) formula_text = cfg.formula;
    strict = cfg.strict_revisit;
    if (alphabet.empty()) {
      for (const auto& s : cfg.stages) alphabet.insert(s.proposition);
    }
  }
  if (formula_text.empty()) throw UsageError("check needs --formula or --config");
  if (o.word.empty()) throw UsageError("check needs --word");
  const mitl::LassoWord word = load_word(o.word);
  if (alphabet.empty()) {
    for (const auto* part : {&word.prefix, &word.cycle}) {
      for (const auto& s : *part) alphabet.insert(s.begin(), s.end());
    }
  }

  const mitl::Formula f = parse_formula(formula_text, alphabet);
  if (o.dump_ast) std::cout << f.to_sexpr() << "\n";

  std::string line = mitl::satisfies(word, 0, f) ? "SAT" : "UNSAT";
  try {
    const auto aut = build_recurrence_automaton(recurrence_stages(f), {strict});
    line += " / automaton: " + run_lasso(aut, word).str();
  } catch (const UnsupportedFragment&) {
    line += " / automaton: n/a (unsupported fragment)";
  }
  std::cout << line << "\n";
  return kOk;
}

int cmd_automaton(const Options& o) {
  std::vector<Stage> stages;
  bool strict = o.strict_revisit.value_or(false);
  std::optional<RunConfig> cfg;
  fs::path dir;
  std::string formula_text = o.formula;
  std::set<std::string> alphabet = split_alphabet(o.alphabet);
  if (!o.config.empty()) {
    cfg = load(o);
    strict = cfg->strict_revisit;
    if (formula_text.empty()) stages = cfg->stages;
    for (const auto& s : cfg->stages) alphabet.insert(s.proposition);
    dir = output_root(o) / config_hash(*cfg);
  } else {
    dir = output_root(o) / "automaton";
  }
  if (stages.empty()) {
    if (formula_text.empty()) throw UsageError("automaton needs --config or --formula");
    const mitl::Formula f = parse_formula(formula_text, alphabet);
    if (o.dump_ast) std::cout << f.to_sexpr() << "\n";
    try {
      stages = recurrence_stages(f);
    } catch (const UnsupportedFragment& e) {
      throw UsageError(std::string("unsupported fragment: ") + e.what());
    }
  }
  const auto aut = build_recurrence_automaton(stages, {strict});
  write_text(dir / "automaton.dot", dump(aut, DumpFormat::Dot));
  write_text(dir / "automaton.json", dump(aut, DumpFormat::Json));
  std::cout << "wrote " << (dir / "automaton.dot").string() << " and automaton.json ("
            << aut.num_states() << " states)\n";
  if (o.dump_product) {
    if (!cfg) throw UsageError("--dump-product needs --config");
    const auto inst = instantiate(*cfg);
    const Tick bound = o.clock_bound ? *o.clock_bound : aut.max_finite_bound() + 2;
    const auto p = enumerate_product(inst->env, inst->automaton, cfg->reward, bound);
    write_text(dir / "product.json", to_json(p).dump(1) + "\n");
    std::cout << "wrote " << (dir / "product.json").string() << " (" << p.states.size() << " states)\n";
  }
  return kOk;
}

int cmd_dump_product(const Options& o) {
  const RunConfig cfg = load(o);
  const auto inst = instantiate(cfg);
  const Tick bound = o.clock_bound ? *o.clock_bound : inst->automaton.max_finite_bound() + 2;
  const auto p = enumerate_product(inst->env, inst->automaton, cfg.reward, bound);
  const std::string text = to_json(p).dump(1) + "\n";
  if (o.out.empty()) {
    std::cout << text;
  } else {
    write_text(o.out, text);
    std::cerr << "wrote " << o.out << " (" << p.states.size() << " states)\n";
  }
  return kOk;
}

int cmd_train(const Options& o) {
  const RunConfig cfg = load(o);
  const std::uint64_t seed = seed_of(o, cfg);
  const auto inst = instantiate(cfg);
  const fs::path dir = run_dir(o, cfg, seed);

  LearnerParams params = cfg.learner;
  params.horizon = inst->horizon(cfg);
  std::signal(SIGINT, [](int) { g_interrupted = true; });
  const TrainResult res = train(inst->product, cfg.mode, params, seed,
                                [](std::size_t) { return !g_interrupted.load(); });

  const KeyBuilder keys(cfg.mode, cfg.learner.history, inst->product.clock_cap());
  write_text(dir / "qtable.json", qtable_to_json(res.table, keys, qtable_meta(cfg, *inst, seed)).dump(1) + "\n");
  write_text(dir / "curve.csv", res.curve.to_csv());
  write_text(dir / "automaton.dot", dump(inst->automaton, DumpFormat::Dot));
  write_text(dir / "config.json", config_to_json(cfg).dump(1) + "\n");

  const auto avg = res.curve.moving_average();
  std::printf("trained %zu episodes (%zu steps, %zu keys)%s; final moving average %.2f\n",
              res.curve.episode_reward.size(), res.steps, res.table.size(),
              g_interrupted ? " [interrupted]" : "", avg.empty() ? 0.0 : avg.back());
  std::printf("%s\n", dir.string().c_str());
  return g_interrupted ? kRuntime : kOk;
}

int cmd_eval(const Options& o) {
  const RunConfig cfg = load(o);
  const std::uint64_t seed = seed_of(o, cfg);
  const fs::path dir = run_dir(o, cfg, seed);
  const fs::path table_path = o.table.empty() ? dir / "qtable.json" : fs::path(o.table);
  if (!fs::exists(table_path)) {
    throw std::runtime_error("missing Q-table " + table_path.string() + " (run train first)");
  }
  const auto tj = nlohmann::json::parse(read_text(table_path));
  const auto& meta = tj.at("meta");
  if (meta.at("map_hash").get<std::string>() != map_hash(cfg)) {
    throw std::runtime_error("Q-table was trained on a different map (map hash mismatch)");
  }
  if (meta.at("mode").get<std::string>() != to_string(cfg.mode)) {
    throw std::runtime_error("Q-table was trained in " + meta.at("mode").get<std::string>() + " mode");
  }
  const auto inst = instantiate(cfg);
  const KeyBuilder keys(cfg.mode, meta.at("history").get<std::size_t>(), meta.at("clock_cap").get<Tick>());
  const QTable table = qtable_from_json(tj, keys, cfg.learner.alpha, cfg.learner.gamma);
  if (table.num_actions() != inst->env.spec().actions.size()) {
    throw std::runtime_error("Q-table action count does not match the map");
  }

  GreedyPolicy policy(table, keys);
  const std::size_t n = o.n ? *o.n : cfg.eval_episodes;
  std::vector<EpisodeTrace> traces;
  const std::uint64_t eval_seed = derive_seed(seed, 0x6576616c);
  const EvalReport rep = success_rate(inst->product, cfg.mode, policy, inst->horizon(cfg), n, eval_seed, &traces);

  auto rj = report_to_json(rep, inst->automaton);
  rj["config_hash"] = config_hash(cfg);
  rj["seed"] = seed;
  rj["deterministic"] = inst->env.spec().deterministic;
  write_text(dir / "report.json", rj.dump(1) + "\n");
  std::string jsonl;
  for (const auto& t : traces) jsonl += trace_to_jsonl(t, inst->env, config_hash(cfg));
  write_text(dir / "traces.jsonl", jsonl);

  std::printf("success_rate %.4f [%.4f, %.4f] over %zu episodes; mean cycles %.2f, mean reward %.1f\n",
              rep.success_rate, rep.wilson_low, rep.wilson_high, rep.n_episodes, rep.mean_cycles,
              rep.mean_reward);
  std::printf("%s\n", (dir / "report.json").string().c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-bounded task specifications for grid-world reinforcement learning"};
  app.require_subcommand(1);
  Options o;

  auto add_config = [&](CLI::App* c, bool required) {
    auto* opt = c->add_option("--config", o.config, "Run configuration (JSON)");
    if (required) opt->required();
  };
  auto add_common = [&](CLI::App* c) {
    c->add_option("--seed", o.seed, "Seed (defaults to the first seed in the config)");
    c->add_flag("--deterministic", o.deterministic, "Force intended moves");
    c->add_flag("--strict-revisit{true}", o.strict_revisit, "Treat revisits of completed stages as violations");
    c->add_option("--out", o.out, "Output root (overrides TSRL_OUT, default runs/)");
  };

  auto* check = app.add_subcommand("check", "Evaluate a formula on a word or trace");
  add_config(check, false);
  check->add_option("--formula", o.formula, "Formula text");
  check->add_option("--word", o.word, "Lasso word (JSON) or trace (JSONL)");
  check->add_option("--alphabet", o.alphabet, "Comma-separated propositions");
  check->add_flag("--dump-ast", o.dump_ast, "Print the parsed formula");
  check->add_flag("--strict-revisit{true}", o.strict_revisit, "Strict revisits in the automaton");

  auto* automaton = app.add_subcommand("automaton", "Compile stages to an automaton and dump it");
  add_config(automaton, false);
  automaton->add_option("--formula", o.formula, "Formula text");
  automaton->add_option("--alphabet", o.alphabet, "Comma-separated propositions");
  automaton->add_flag("--dump-ast", o.dump_ast, "Print the parsed formula");
  automaton->add_flag("--dump-product", o.dump_product, "Also write the enumerated product");
  automaton->add_option("--clock-bound", o.clock_bound, "Clock bound for --dump-product");
  add_common(automaton);

  auto* tr = app.add_subcommand("train", "Train a Q-table");
  add_config(tr, true);
  tr->add_option("--episodes", o.episodes, "Override the episode count");
  add_common(tr);

  auto* ev = app.add_subcommand("eval", "Evaluate the greedy policy of a trained table");
  add_config(ev, true);
  ev->add_option("--n", o.n, "Evaluation episodes");
  ev->add_option("--table", o.table, "Q-table (default: the run directory's qtable.json)");
  ev->add_option("--episodes", o.episodes, "Episode count the table was trained with");
  add_common(ev);

  auto* dp = app.add_subcommand("dump-product", "Write the explicit product as JSON");
  add_config(dp, true);
  dp->add_option("--clock-bound", o.clock_bound, "Clock bound (default: largest finite bound + 2)");
  add_common(dp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (check->parsed()) return cmd_check(o);
    if (automaton->parsed()) return cmd_automaton(o);
    if (tr->parsed()) return cmd_train(o);
    if (ev->parsed()) return cmd_eval(o);
    if (dp->parsed()) return cmd_dump_product(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
