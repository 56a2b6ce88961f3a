#include "tsrl/grid.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace tsrl {

std::string_view to_string(Move m) {
  switch (m) {
    case Move::Up: return "up";
    case Move::Left: return "left";
    case Move::Down: return "down";
    case Move::Right: return "right";
    case Move::Stay: return "stay";
  }
  return "?";
}

Move move_from_string(std::string_view name) {
  for (auto m : kAllMoves) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown action '" + std::string(name) + "'");
}

std::string_view to_string(Side s) {
  switch (s) {
    case Side::North: return "N";
    case Side::West: return "W";
    case Side::South: return "S";
    case Side::East: return "E";
  }
  return "?";
}

Side side_from_string(std::string_view name) {
  if (name == "N" || name == "north") return Side::North;
  if (name == "W" || name == "west") return Side::West;
  if (name == "S" || name == "south") return Side::South;
  if (name == "E" || name == "east") return Side::East;
  throw std::invalid_argument("unknown direction '" + std::string(name) + "'");
}

std::string_view to_string(Feature f) {
  switch (f) {
    case Feature::Wall: return "wall";
    case Feature::Hallway: return "hallway";
    case Feature::Door: return "door";
    case Feature::Window: return "window";
  }
  return "?";
}

Feature feature_from_string(std::string_view name) {
  if (name == "wall") return Feature::Wall;
  if (name == "hallway") return Feature::Hallway;
  if (name == "door") return Feature::Door;
  if (name == "window") return Feature::Window;
  throw std::invalid_argument("unknown feature '" + std::string(name) + "'");
}

namespace {

constexpr std::array<Side, 4> kSides = {Side::North, Side::West, Side::South, Side::East};

Cell offset(Cell c, Side s) {
  switch (s) {
    case Side::North: return {c.x, c.y - 1};
    case Side::West: return {c.x - 1, c.y};
    case Side::South: return {c.x, c.y + 1};
    case Side::East: return {c.x + 1, c.y};
  }
  return c;
}

Side opposite(Side s) {
  switch (s) {
    case Side::North: return Side::South;
    case Side::West: return Side::East;
    case Side::South: return Side::North;
    case Side::East: return Side::West;
  }
  return s;
}

Side side_of(Move m) {
  switch (m) {
    case Move::Up: return Side::North;
    case Move::Left: return Side::West;
    case Move::Down: return Side::South;
    default: return Side::East;
  }
}

std::string cell_str(Cell c) { return std::to_string(c.x) + "," + std::to_string(c.y); }

}  // namespace

void GridSpec::validate() const {
  if (width <= 0 || height <= 0) throw MapError("grid dimensions must be positive");
  if (!in_bounds(start)) throw MapError("start cell " + cell_str(start) + " is off the grid");
  if (blocked.count(start)) throw MapError("start cell " + cell_str(start) + " is blocked");
  for (const auto& b : blocked) {
    if (!in_bounds(b)) throw MapError("blocked cell " + cell_str(b) + " is off the grid");
  }
  for (const auto& [c, ls] : labels) {
    if (!in_bounds(c)) throw MapError("labelled cell " + cell_str(c) + " is off the grid");
    if (blocked.count(c)) throw MapError("labelled cell " + cell_str(c) + " is blocked");
    for (const auto& l : ls) {
      if (!propositions.empty() && !propositions.count(l)) {
        throw MapError("label '" + l + "' is not a declared proposition");
      }
    }
  }
  if (actions.empty()) throw MapError("action set is empty");
  std::set<Move> seen(actions.begin(), actions.end());
  if (seen.size() != actions.size()) throw MapError("duplicate action");
  if (!(slip_intended >= 0.0 && slip_intended <= 1.0)) {
    throw MapError("slip probability must lie in [0,1]");
  }
  for (const auto& [c, s] : wall_edges) {
    if (!in_bounds(c)) throw MapError("wall edge at " + cell_str(c) + " is off the grid");
  }
}

GridWorld::GridWorld(GridSpec spec, ObservationSpec observation)
    : spec_(std::move(spec)), obs_spec_(std::move(observation)) {
  spec_.validate();
  if (!(obs_spec_.true_obs_prob >= 0.0 && obs_spec_.true_obs_prob <= 1.0)) {
    throw MapError("observation probability must lie in [0,1]");
  }
  // Mirror every wall edge onto the neighbouring cell.
  std::set<std::pair<Cell, Side>> mirrored;
  for (const auto& [c, s] : spec_.wall_edges) {
    mirrored.insert({c, s});
    const Cell n = offset(c, s);
    if (spec_.in_bounds(n)) mirrored.insert({n, opposite(s)});
  }
  spec_.wall_edges = std::move(mirrored);

  for (int y = 0; y < spec_.height; ++y) {
    for (int x = 0; x < spec_.width; ++x) cells_.push_back({x, y});
  }
  build_transitions();
  build_observations();
}

const mitl::LabelSet& GridWorld::labels(Cell c) const {
  static const mitl::LabelSet empty;
  auto it = spec_.labels.find(c);
  return it == spec_.labels.end() ? empty : it->second;
}

std::size_t GridWorld::action_index(Move m) const {
  auto it = std::find(spec_.actions.begin(), spec_.actions.end(), m);
  if (it == spec_.actions.end()) {
    throw std::invalid_argument("action '" + std::string(to_string(m)) + "' is not available");
  }
  return static_cast<std::size_t>(it - spec_.actions.begin());
}

bool GridWorld::allows(Move m) const {
  return std::find(spec_.actions.begin(), spec_.actions.end(), m) != spec_.actions.end();
}

bool GridWorld::open_side(Cell from, Side side) const {
  const Cell n = offset(from, side);
  return passable(n) && !spec_.wall_edges.count({from, side});
}

Cell GridWorld::neighbor(Cell from, Side side) const {
  return open_side(from, side) ? offset(from, side) : from;
}

void GridWorld::build_transitions() {
  transitions_.assign(cells_.size() * kAllMoves.size(), {});
  for (const Cell c : cells_) {
    for (const Move m : kAllMoves) {
      std::map<Cell, double> dist;
      if (m == Move::Stay) {
        dist[c] = 1.0;
      } else {
        const Side intended = side_of(m);
        if (spec_.deterministic) {
          dist[neighbor(c, intended)] = 1.0;
        } else if (spec_.slip_model == SlipModel::Sideways) {
          const double p = spec_.slip_intended;
          dist[neighbor(c, intended)] += p;
          const double side = (1.0 - p) / 2.0;
          const bool vertical = intended == Side::North || intended == Side::South;
          if (side > 0.0) {
            dist[neighbor(c, vertical ? Side::West : Side::North)] += side;
            dist[neighbor(c, vertical ? Side::East : Side::South)] += side;
          }
        } else {
          const double p = spec_.slip_intended;
          dist[neighbor(c, intended)] += p;
          std::vector<Side> others;
          for (Side s : kSides) {
            if (s != intended && open_side(c, s)) others.push_back(s);
          }
          if (1.0 - p > 0.0) {
            if (others.empty()) {
              dist[c] += 1.0 - p;
            } else {
              for (Side s : others) dist[offset(c, s)] += (1.0 - p) / static_cast<double>(others.size());
            }
          }
        }
      }
      auto& out = transitions_[index(c) * kAllMoves.size() + static_cast<std::size_t>(m)];
      for (const auto& [cell, p] : dist) {
        if (p > 0.0) out.push_back({cell, p});
      }
    }
  }
}

void GridWorld::build_observations() {
  observations_.assign(cells_.size(), {});
  switch (obs_spec_.kind) {
    case ObservationKind::Full:
      for (const Cell c : cells_) observations_[index(c)] = {{index(c), 1.0}};
      num_observations_ = cells_.size();
      break;
    case ObservationKind::NoisyCell:
      for (const Cell c : cells_) {
        std::vector<Cell> around;
        for (Side s : kSides) {
          const Cell n = offset(c, s);
          if (spec_.in_bounds(n)) around.push_back(n);
        }
        auto& out = observations_[index(c)];
        const double q = obs_spec_.true_obs_prob;
        if (around.empty() || q >= 1.0) {
          out.push_back({index(c), 1.0});
          continue;
        }
        if (q > 0.0) out.push_back({index(c), q});
        const double share = (1.0 - q) / static_cast<double>(around.size());
        for (const Cell n : around) out.push_back({index(n), share});
      }
      num_observations_ = cells_.size();
      break;
    case ObservationKind::LocalFeatures: {
      std::set<FeatureTuple> distinct;
      for (const Cell c : cells_) {
        if (!passable(c)) continue;
        auto it = obs_spec_.features.find(c);
        if (it == obs_spec_.features.end()) {
          throw MapError("no local features for cell " + cell_str(c));
        }
        distinct.insert(it->second);
      }
      feature_alphabet_.assign(distinct.begin(), distinct.end());
      for (const Cell c : cells_) {
        if (!passable(c)) continue;
        const auto& f = obs_spec_.features.at(c);
        const auto pos = std::lower_bound(feature_alphabet_.begin(), feature_alphabet_.end(), f);
        observations_[index(c)] = {
            {static_cast<std::size_t>(pos - feature_alphabet_.begin()), 1.0}};
      }
      num_observations_ = feature_alphabet_.size();
      break;
    }
  }
}

std::span<const Weighted<Cell>> GridWorld::transition(Cell from, Move action) const {
  if (!allows(action)) {
    throw std::invalid_argument("action '" + std::string(to_string(action)) + "' is not available");
  }
  if (!spec_.in_bounds(from)) throw std::invalid_argument("cell " + cell_str(from) + " is off the grid");
  return transitions_[index(from) * kAllMoves.size() + static_cast<std::size_t>(action)];
}

Cell GridWorld::step(Cell from, Move action, Rng& rng) const {
  const auto dist = transition(from, action);
  double u = rng.uniform();
  for (const auto& w : dist) {
    if (u < w.probability) return w.value;
    u -= w.probability;
  }
  return dist.back().value;
}

std::span<const Weighted<std::size_t>> GridWorld::observation_distribution(Cell at) const {
  return observations_.at(index(at));
}

std::size_t GridWorld::observe(Cell at, Rng& rng) const {
  const auto& dist = observations_.at(index(at));
  if (dist.size() == 1 || obs_spec_.kind != ObservationKind::NoisyCell) return dist.front().value;
  double u = rng.uniform();
  for (const auto& w : dist) {
    if (u < w.probability) return w.value;
    u -= w.probability;
  }
  return dist.back().value;
}

std::string GridWorld::describe_observation(std::size_t id) const {
  if (obs_spec_.kind == ObservationKind::LocalFeatures) {
    const auto& f = feature_alphabet_.at(id);
    std::string out = "(";
    for (std::size_t i = 0; i < 4; ++i) out += std::string(i ? "," : "") + std::string(to_string(f[i]));
    return out + ")";
  }
  return cell_str(cell_at(id));
}

// ---------------------------------------------------------------------------
// Loading

namespace {

Cell cell_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    throw MapError(std::string(what) + " must be [x, y]");
  }
  return {j[0].get<int>(), j[1].get<int>()};
}

Cell cell_from_key(const std::string& key) {
  std::istringstream is(key);
  Cell c;
  char comma = 0;
  if (!(is >> c.x >> comma >> c.y) || comma != ',' || !is.eof()) {
    throw MapError("feature key '" + key + "' must look like \"x,y\"");
  }
  return c;
}

}  // namespace

GridWorld map_from_json(const nlohmann::json& j) {
  try {
    GridSpec spec;
    spec.width = j.at("width").get<int>();
    spec.height = j.at("height").get<int>();
    spec.start = cell_from_json(j.at("start"), "start");
    for (const auto& b : j.value("blocked", nlohmann::json::array())) {
      spec.blocked.insert(cell_from_json(b, "blocked cell"));
    }
    if (j.contains("propositions")) {
      spec.propositions = j.at("propositions").get<std::set<std::string>>();
    }
    const auto labels = j.value("labels", nlohmann::json::object());
    for (const auto& [label, cells] : labels.items()) {
      for (const auto& c : cells) spec.labels[cell_from_json(c, "labelled cell")].insert(label);
    }
    for (const auto& a : j.at("actions")) spec.actions.push_back(move_from_string(a.get<std::string>()));
    spec.slip_intended = j.value("slip", 1.0);
    spec.deterministic = j.value("deterministic", false);
    const std::string model = j.value("slip_model", std::string("sideways"));
    if (model == "sideways") {
      spec.slip_model = SlipModel::Sideways;
    } else if (model == "uniform_feasible") {
      spec.slip_model = SlipModel::UniformFeasible;
    } else {
      throw MapError("unknown slip_model '" + model + "'");
    }
    for (const auto& w : j.value("wall_edges", nlohmann::json::array())) {
      if (!w.is_array() || w.size() != 3) throw MapError("wall edge must be [x, y, dir]");
      spec.wall_edges.insert({{w[0].get<int>(), w[1].get<int>()}, side_from_string(w[2].get<std::string>())});
    }

    ObservationSpec obs;
    const auto& oj = j.value("observation", nlohmann::json{{"kind", "full"}});
    const std::string kind = oj.at("kind").get<std::string>();
    if (kind == "full") {
      obs.kind = ObservationKind::Full;
    } else if (kind == "noisy_cell") {
      obs.kind = ObservationKind::NoisyCell;
      obs.true_obs_prob = oj.at("true_obs_prob").get<double>();
    } else if (kind == "local_features") {
      obs.kind = ObservationKind::LocalFeatures;
      for (const auto& [key, tuple] : oj.at("features").items()) {
        if (!tuple.is_array() || tuple.size() != 4) {
          throw MapError("feature tuple for " + key + " must list N, W, S, E");
        }
        FeatureTuple f{};
        for (std::size_t i = 0; i < 4; ++i) f[i] = feature_from_string(tuple[i].get<std::string>());
        obs.features[cell_from_key(key)] = f;
      }
    } else {
      throw MapError("unknown observation kind '" + kind + "'");
    }
    return GridWorld(std::move(spec), std::move(obs));
  } catch (const MapError&) {
    throw;
  } catch (const std::exception& e) {
    throw MapError(std::string("invalid map: ") + e.what());
  }
}

GridWorld load_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MapError("cannot open map file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw MapError(path.string() + ": " + e.what());
  }
  try {
    return map_from_json(j);
  } catch (const MapError& e) {
    throw MapError(path.string() + ": " + e.what());
  }
}

}  // namespace tsrl
