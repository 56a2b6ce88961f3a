#include "tsrl/config.hpp"

#include <cstdio>
#include <fstream>

#include "tsrl/mitl.hpp"

namespace tsrl {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == k;
    if (!ok) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Interval interval_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("interval must be [lower, upper|null]");
  const auto lo = j[0].get<Tick>();
  if (j[1].is_null()) return Interval::from(lo);
  return Interval::closed(lo, j[1].get<Tick>());
}

json interval_to_json(const Interval& i) {
  return i.upper ? json::array({i.lower, *i.upper}) : json::array({i.lower, nullptr});
}

std::set<std::string> map_propositions(const json& m) {
  std::set<std::string> props;
  if (m.contains("propositions")) {
    for (const auto& p : m.at("propositions")) props.insert(p.get<std::string>());
  }
  if (m.contains("labels")) {
    for (const auto& [k, v] : m.at("labels").items()) props.insert(k);
  }
  return props;
}

}  // namespace

RunConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  reject_unknown(j,
                 {"name", "formula", "stages", "map", "mode", "strict_revisit", "deterministic", "reward",
                  "learner", "horizon", "seeds", "eval_episodes"},
                 "config");
  RunConfig cfg;
  try {
    read_opt(j, "name", cfg.name);
    cfg.map_ref = j.at("map").get<std::string>();
    cfg.map_path = base_dir / cfg.map_ref;
    {
      std::ifstream in(cfg.map_path);
      if (!in) throw ConfigError("cannot open map " + cfg.map_path.string());
      cfg.map_json = json::parse(in);
    }
    cfg.mode = learner_mode_from_string(j.at("mode").get<std::string>());
    read_opt(j, "strict_revisit", cfg.strict_revisit);
    if (j.contains("deterministic") && !j.at("deterministic").is_null()) {
      cfg.deterministic = j.at("deterministic").get<bool>();
    }
    read_opt(j, "horizon", cfg.horizon);
    read_opt(j, "eval_episodes", cfg.eval_episodes);
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (cfg.seeds.empty()) throw ConfigError("seeds must not be empty");

    if (j.contains("reward")) {
      const auto& r = j.at("reward");
      reject_unknown(r, {"accept_reward", "movement_penalty"}, "reward");
      read_opt(r, "accept_reward", cfg.reward.accept_reward);
      read_opt(r, "movement_penalty", cfg.reward.movement_penalty);
    }
    cfg.reward.validate();

    // Replay defaults on for partially observable runs.
    cfg.learner.replay = cfg.mode == LearnerMode::Pomdp;
    if (j.contains("learner")) {
      const auto& l = j.at("learner");
      reject_unknown(l,
                     {"alpha", "gamma", "epsilon_start", "epsilon_end", "epsilon_decay_fraction", "episodes",
                      "sync_period", "replay", "replay_capacity", "batch_size", "history"},
                     "learner");
      read_opt(l, "alpha", cfg.learner.alpha);
      read_opt(l, "gamma", cfg.learner.gamma);
      read_opt(l, "epsilon_start", cfg.learner.epsilon_start);
      read_opt(l, "epsilon_end", cfg.learner.epsilon_end);
      read_opt(l, "epsilon_decay_fraction", cfg.learner.epsilon_decay_fraction);
      read_opt(l, "episodes", cfg.learner.episodes);
      read_opt(l, "sync_period", cfg.learner.sync_period);
      read_opt(l, "replay", cfg.learner.replay);
      read_opt(l, "replay_capacity", cfg.learner.replay_capacity);
      read_opt(l, "batch_size", cfg.learner.batch_size);
      read_opt(l, "history", cfg.learner.history);
    }
    cfg.learner.horizon = cfg.horizon;
    cfg.learner.validate();

    const auto props = map_propositions(cfg.map_json);
    if (j.contains("formula")) cfg.formula = j.at("formula").get<std::string>();
    if (j.contains("stages")) {
      for (const auto& s : j.at("stages")) {
        reject_unknown(s, {"proposition", "interval"}, "stage");
        cfg.stages.push_back({s.at("proposition").get<std::string>(), interval_from_json(s.at("interval"))});
      }
    }
    if (!cfg.formula.empty()) {
      const auto from_formula = recurrence_stages(mitl::parse(cfg.formula, props));
      if (cfg.stages.empty()) {
        cfg.stages = from_formula;
      } else if (cfg.stages != from_formula) {
        throw ConfigError("stages do not match the formula");
      }
    }
    if (cfg.stages.empty()) throw ConfigError("config needs a formula or a stage list");
    for (const auto& s : cfg.stages) {
      if (!props.count(s.proposition)) {
        throw ConfigError("stage proposition '" + s.proposition + "' is not a label of the map");
      }
    }

    const std::string kind = cfg.map_json.contains("observation")
                                 ? cfg.map_json.at("observation").value("kind", std::string("full"))
                                 : std::string("full");
    if ((cfg.mode == LearnerMode::Mdp) != (kind == "full")) {
      throw ConfigError("mode " + std::string(to_string(cfg.mode)) + " does not match observation kind " + kind);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

nlohmann::ordered_json config_to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["name"] = cfg.name;
  j["formula"] = cfg.formula;
  j["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : cfg.stages) {
    j["stages"].push_back({{"proposition", s.proposition}, {"interval", interval_to_json(s.window)}});
  }
  j["map"] = cfg.map_ref;
  j["mode"] = std::string(to_string(cfg.mode));
  j["strict_revisit"] = cfg.strict_revisit;
  j["deterministic"] = cfg.deterministic ? nlohmann::ordered_json(*cfg.deterministic) : nlohmann::ordered_json();
  j["reward"] = {{"accept_reward", cfg.reward.accept_reward}, {"movement_penalty", cfg.reward.movement_penalty}};
  const auto& l = cfg.learner;
  j["learner"] = {{"alpha", l.alpha},
                  {"gamma", l.gamma},
                  {"epsilon_start", l.epsilon_start},
                  {"epsilon_end", l.epsilon_end},
                  {"epsilon_decay_fraction", l.epsilon_decay_fraction},
                  {"episodes", l.episodes},
                  {"sync_period", l.sync_period},
                  {"replay", l.replay},
                  {"replay_capacity", l.replay_capacity},
                  {"batch_size", l.batch_size},
                  {"history", l.history}};
  j["horizon"] = cfg.horizon;
  j["seeds"] = cfg.seeds;
  j["eval_episodes"] = cfg.eval_episodes;
  return j;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string map_hash(const RunConfig& cfg) { return hex64(fnv1a(cfg.map_json.dump())); }

std::string config_hash(const RunConfig& cfg) {
  // The seed list is excluded: runs with different seeds share a directory.
  auto j = config_to_json(cfg);
  j.erase("seeds");
  return hex64(fnv1a(j.dump() + "|" + map_hash(cfg)));
}

std::size_t Instance::horizon(const RunConfig& cfg) const {
  return cfg.horizon ? cfg.horizon : product.default_horizon();
}

std::unique_ptr<Instance> instantiate(const RunConfig& cfg, std::optional<bool> deterministic) {
  nlohmann::json m = cfg.map_json;
  if (deterministic) {
    m["deterministic"] = *deterministic;
  } else if (cfg.deterministic) {
    m["deterministic"] = *cfg.deterministic;
  }
  return std::make_unique<Instance>(map_from_json(m),
                                    build_recurrence_automaton(cfg.stages, {cfg.strict_revisit}), cfg.reward);
}

nlohmann::ordered_json qtable_meta(const RunConfig& cfg, const Instance& inst, std::uint64_t seed) {
  nlohmann::ordered_json meta;
  meta["config_hash"] = config_hash(cfg);
  meta["map_hash"] = map_hash(cfg);
  meta["seed"] = seed;
  meta["mode"] = std::string(to_string(cfg.mode));
  meta["history"] = cfg.learner.history;
  meta["clock_cap"] = inst.product.clock_cap();
  meta["actions"] = nlohmann::ordered_json::array();
  for (Move m : inst.env.spec().actions) meta["actions"].push_back(std::string(to_string(m)));
  return meta;
}

}  // namespace tsrl
