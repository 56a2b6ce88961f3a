#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsrl/automaton.hpp"
#include "tsrl/grid.hpp"
#include "tsrl/product.hpp"
#include "tsrl/qlearning.hpp"

namespace tsrl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string name;
  std::string formula;
  std::vector<Stage> stages;
  // As written in the file, and resolved against the config's directory.
  std::string map_ref;
  std::filesystem::path map_path;
  nlohmann::json map_json;
  RewardSpec reward;
  LearnerParams learner;
  LearnerMode mode = LearnerMode::Mdp;
  bool strict_revisit = false;
  // Overrides the map's own flag when set.
  std::optional<bool> deterministic;
  std::vector<std::uint64_t> seeds{0};
  std::size_t eval_episodes = 100;
  // 0 means "use the product default".
  std::size_t horizon = 0;
};

RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

// Canonical form used for hashing and for the copy stored next to the run.
nlohmann::ordered_json config_to_json(const RunConfig& cfg);

std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);
std::string map_hash(const RunConfig& cfg);
// Hash of the canonical config together with the map contents.
std::string config_hash(const RunConfig& cfg);

// Environment, automaton and product built from a config. Not movable because
// the product points into its siblings.
struct Instance {
  GridWorld env;
  TimedLdgba automaton;
  Product product;

  Instance(GridWorld e, TimedLdgba a, RewardSpec r)
      : env(std::move(e)), automaton(std::move(a)), product(env, automaton, r) {}
  Instance(const Instance&) = delete;
  Instance& operator=(const Instance&) = delete;

  std::size_t horizon(const RunConfig& cfg) const;
};

// `deterministic` overrides both the map and the config.
std::unique_ptr<Instance> instantiate(const RunConfig& cfg, std::optional<bool> deterministic = std::nullopt);

// Metadata written into qtable.json.
nlohmann::ordered_json qtable_meta(const RunConfig& cfg, const Instance& inst, std::uint64_t seed);

}  // namespace tsrl
