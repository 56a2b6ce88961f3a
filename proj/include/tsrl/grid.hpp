#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsrl/mitl.hpp"
#include "tsrl/random.hpp"

namespace tsrl {

// Grid coordinates: x grows to the east (right), y grows to the south (down).
struct Cell {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

enum class Move : std::uint8_t { Up, Left, Down, Right, Stay };
inline constexpr std::array<Move, 5> kAllMoves = {Move::Up, Move::Left, Move::Down, Move::Right,
                                                  Move::Stay};

std::string_view to_string(Move m);
Move move_from_string(std::string_view name);

// Compass sides in observation order.
enum class Side : std::uint8_t { North, West, South, East };
std::string_view to_string(Side s);
Side side_from_string(std::string_view name);

enum class Feature : std::uint8_t { Wall, Hallway, Door, Window };
std::string_view to_string(Feature f);
Feature feature_from_string(std::string_view name);
using FeatureTuple = std::array<Feature, 4>;  // North, West, South, East

enum class SlipModel {
  // Intended direction with slip_intended, the rest split over the two
  // perpendicular directions.
  Sideways,
  // Intended direction with slip_intended, the rest split over the other
  // directions that are not walled off.
  UniformFeasible,
};

struct GridSpec {
  int width = 0;
  int height = 0;
  std::set<Cell> blocked;
  std::map<Cell, mitl::LabelSet> labels;
  Cell start;
  std::vector<Move> actions;
  double slip_intended = 1.0;
  bool deterministic = false;
  SlipModel slip_model = SlipModel::Sideways;
  // Impassable edges, stored once per side of the edge.
  std::set<std::pair<Cell, Side>> wall_edges;
  // Declared proposition alphabet; empty means "whatever labels use".
  std::set<std::string> propositions;

  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  void validate() const;
};

enum class ObservationKind { Full, NoisyCell, LocalFeatures };

struct ObservationSpec {
  ObservationKind kind = ObservationKind::Full;
  double true_obs_prob = 1.0;
  std::map<Cell, FeatureTuple> features;
};

template <typename T>
struct Weighted {
  T value;
  double probability;
};

// Grid world with precomputed transition and observation distributions. The
// specs are immutable once the world is built; stepping only needs an RNG.
class GridWorld {
 public:
  GridWorld(GridSpec spec, ObservationSpec observation);

  const GridSpec& spec() const { return spec_; }
  const ObservationSpec& observation_spec() const { return obs_spec_; }

  std::size_t num_cells() const { return cells_.size(); }
  // Dense index over all cells, row-major, including blocked ones.
  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y * spec_.width + c.x); }
  Cell cell_at(std::size_t index) const { return cells_.at(index); }
  bool passable(Cell c) const { return spec_.in_bounds(c) && !spec_.blocked.count(c); }
  const mitl::LabelSet& labels(Cell c) const;

  std::size_t action_index(Move m) const;
  bool allows(Move m) const;

  // Analytic successor distribution; probabilities sum to one.
  std::span<const Weighted<Cell>> transition(Cell from, Move action) const;
  Cell step(Cell from, Move action, Rng& rng) const;

  // Observation ids are dense in [0, num_observations()).
  std::size_t num_observations() const { return num_observations_; }
  std::span<const Weighted<std::size_t>> observation_distribution(Cell at) const;
  // Full observability returns the cell index without touching the RNG.
  std::size_t observe(Cell at, Rng& rng) const;
  std::string describe_observation(std::size_t id) const;

  // Position reached by moving one step, ignoring slip; stays put when walled.
  Cell neighbor(Cell from, Side side) const;
  bool open_side(Cell from, Side side) const;

 private:
  void build_transitions();
  void build_observations();

  GridSpec spec_;
  ObservationSpec obs_spec_;
  std::vector<Cell> cells_;
  std::vector<std::vector<Weighted<Cell>>> transitions_;  // [cell * 5 + move]
  std::vector<std::vector<Weighted<std::size_t>>> observations_;
  std::vector<FeatureTuple> feature_alphabet_;
  std::size_t num_observations_ = 0;
};

class MapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

GridWorld map_from_json(const nlohmann::json& j);
GridWorld load_map(const std::filesystem::path& path);

}  // namespace tsrl
