#include <doctest.h>

#include <cmath>
#include <map>

#include "tsrl/grid.hpp"

using namespace tsrl;
using nlohmann::json;

namespace {

const std::filesystem::path kMaps = std::filesystem::path(TSRL_SOURCE_DIR) / "data/maps";

json base_map() {
  return json::parse(R"({
    "width": 5, "height": 5, "start": [0, 0], "blocked": [[2, 2]],
    "propositions": ["a", "b"], "labels": {"a": [[1, 3]], "b": [[3, 1]]},
    "actions": ["up", "left", "down", "right", "stay"], "slip": 0.8
  })");
}

double mass(std::span<const Weighted<Cell>> d, Cell c) {
  double m = 0.0;
  for (const auto& w : d) m += w.value == c ? w.probability : 0.0;
  return m;
}

template <typename T>
double total(std::span<const Weighted<T>> d) {
  double s = 0.0;
  for (const auto& w : d) s += w.probability;
  return s;
}

}  // namespace

TEST_CASE("sideways slip splits the remainder across perpendicular moves") {
  auto j = base_map();
  j["blocked"] = json::array();
  const auto env = map_from_json(j);
  const auto d = env.transition({2, 2}, Move::Right);
  CHECK(mass(d, {3, 2}) == doctest::Approx(0.8));
  CHECK(mass(d, {2, 1}) == doctest::Approx(0.1));
  CHECK(mass(d, {2, 3}) == doctest::Approx(0.1));
  CHECK(d.size() == 3);

  const auto stay = env.transition({2, 2}, Move::Stay);
  REQUIRE(stay.size() == 1);
  CHECK(stay[0].value == Cell{2, 2});
  CHECK(stay[0].probability == 1.0);

  // East edge: the intended move clamps to staying put.
  CHECK(mass(env.transition({4, 2}, Move::Right), {4, 2}) == doctest::Approx(0.8));
  // Corner: one sideways branch also clamps.
  CHECK(mass(env.transition({4, 0}, Move::Right), {4, 0}) == doctest::Approx(0.9));
}

TEST_CASE("blocked cells and walls resolve to staying") {
  const auto env = map_from_json(base_map());
  CHECK_FALSE(env.passable({2, 2}));
  CHECK(mass(env.transition({1, 2}, Move::Right), {1, 2}) == doctest::Approx(0.8));
  CHECK(env.neighbor({1, 2}, Side::East) == Cell{1, 2});
  CHECK(env.neighbor({1, 2}, Side::West) == Cell{0, 2});

  auto j = base_map();
  j["wall_edges"] = json::array({json::array({0, 0, "E"})});
  const auto walled = map_from_json(j);
  CHECK_FALSE(walled.open_side({0, 0}, Side::East));
  CHECK_FALSE(walled.open_side({1, 0}, Side::West));  // mirrored
}

TEST_CASE("deterministic flag forces the intended outcome") {
  auto j = base_map();
  j["deterministic"] = true;
  const auto env = map_from_json(j);
  const auto d = env.transition({0, 0}, Move::Down);
  REQUIRE(d.size() == 1);
  CHECK(d[0].value == Cell{0, 1});
}

TEST_CASE("action validation") {
  auto j = base_map();
  j["actions"] = json::array({"up", "left", "down", "right"});
  const auto env = map_from_json(j);
  CHECK_FALSE(env.allows(Move::Stay));
  CHECK_THROWS_AS(env.transition({0, 0}, Move::Stay), std::invalid_argument);
  CHECK_THROWS_AS(env.action_index(Move::Stay), std::invalid_argument);
  CHECK(env.action_index(Move::Right) == 3);
  CHECK_THROWS_AS(move_from_string("jump"), std::invalid_argument);
}

TEST_CASE("noisy observations spread the remainder over in-bounds neighbours") {
  const auto env = load_map(kMaps / "grid10.json");
  auto check = [&](Cell c, std::size_t neighbours) {
    const auto d = env.observation_distribution(c);
    REQUIRE(d.size() == neighbours + 1);
    CHECK(total(d) == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& w : d) {
      if (w.value == env.index(c)) {
        CHECK(w.probability == doctest::Approx(0.9));
      } else {
        CHECK(w.probability == doctest::Approx(0.1 / static_cast<double>(neighbours)));
      }
    }
  };
  check({5, 7}, 4);
  check({0, 5}, 3);
  check({0, 0}, 2);
  check({9, 9}, 2);
}

TEST_CASE("office map: aliasing and the observation alphabet") {
  const auto env = load_map(kMaps / "office.json");
  CHECK(env.spec().width == 4);
  CHECK(env.spec().height == 4);
  CHECK(env.num_observations() == 13);
  Rng rng(1);
  const auto cell_of = [&](const char* label) {
    for (const auto& [c, ls] : env.spec().labels) {
      if (ls.count(label)) return c;
    }
    FAIL("missing label " << label);
    return Cell{};
  };
  const auto ob = env.observe(cell_of("b"), rng);
  CHECK(ob == env.observe(cell_of("c"), rng));
  CHECK(env.describe_observation(ob) == "(wall,wall,wall,door)");
  for (const char* l : {"a", "b", "c", "d", "S", "Print", "Sply"}) CHECK(env.passable(cell_of(l)));

  // Every passable cell reads a single fixed tuple.
  for (std::size_t i = 0; i < env.num_cells(); ++i) {
    const Cell c = env.cell_at(i);
    if (!env.passable(c)) continue;
    const auto d = env.observation_distribution(c);
    REQUIRE(d.size() == 1);
    CHECK(d[0].probability == 1.0);
  }

  // Office slip: 0.9 intended, the rest spread over the open sides.
  const Cell hall{1, 1};
  const auto d = env.transition(hall, Move::Up);
  CHECK(total(d) == doctest::Approx(1.0));
  CHECK(mass(d, env.neighbor(hall, Side::North)) >= 0.9 - 1e-12);
}

TEST_CASE("bundled maps load") {
  const auto g5 = load_map(kMaps / "grid5.json");
  CHECK(g5.spec().width == 5);
  CHECK(g5.spec().blocked.size() == 1);
  std::set<std::string> labels;
  for (const auto& [c, ls] : g5.spec().labels) labels.insert(ls.begin(), ls.end());
  CHECK(labels == std::set<std::string>{"a", "b"});

  const auto g10 = load_map(kMaps / "grid10.json");
  CHECK(g10.spec().width == 10);
  CHECK_FALSE(g10.allows(Move::Stay));
  CHECK(g10.num_observations() == 100);
}

TEST_CASE("map errors") {
  auto bad = base_map();
  bad["start"] = json::array({2, 2});
  CHECK_THROWS_AS(map_from_json(bad), MapError);

  bad = base_map();
  bad["labels"]["zz"] = json::array({json::array({0, 1})});
  CHECK_THROWS_AS(map_from_json(bad), MapError);

  bad = base_map();
  bad["observation"] = json::parse(R"({"kind": "local_features", "features": {"0,0": ["wall","wall","lava","door"]}})");
  CHECK_THROWS_AS(map_from_json(bad), MapError);

  bad = base_map();
  bad.erase("width");
  CHECK_THROWS_AS(map_from_json(bad), MapError);

  bad = base_map();
  bad["slip"] = 1.5;
  CHECK_THROWS_AS(map_from_json(bad), MapError);

  bad = base_map();
  bad["observation"] = json{{"kind", "sonar"}};
  CHECK_THROWS_AS(map_from_json(bad), MapError);

  CHECK_THROWS_AS(load_map(kMaps / "missing.json"), MapError);
}

TEST_CASE("property: transition distributions are normalised and sampled faithfully") {
  for (const char* name : {"grid5.json", "grid10.json", "office.json", "toy3.json"}) {
    const auto env = load_map(kMaps / name);
    for (std::size_t i = 0; i < env.num_cells(); ++i) {
      const Cell c = env.cell_at(i);
      if (!env.passable(c)) continue;
      for (Move m : env.spec().actions) {
        const auto d = env.transition(c, m);
        REQUIRE(std::abs(total(d) - 1.0) < 1e-12);
        for (const auto& w : d) REQUIRE(env.passable(w.value));
      }
      REQUIRE(std::abs(total(env.observation_distribution(c)) - 1.0) < 1e-12);
    }
  }

  // Empirical check on one corner and one interior cell.
  const auto env = load_map(kMaps / "grid5.json");
  Rng rng(99);
  const std::size_t n = 100000;
  for (Cell c : {Cell{0, 0}, Cell{2, 1}}) {
    std::map<Cell, std::size_t> counts;
    for (std::size_t k = 0; k < n; ++k) ++counts[env.step(c, Move::Up, rng)];
    for (const auto& w : env.transition(c, Move::Up)) {
      const double p = w.probability;
      const double se = std::sqrt(p * (1 - p) / static_cast<double>(n));
      CHECK(std::abs(static_cast<double>(counts[w.value]) / n - p) <= 3 * se + 1e-12);
    }
  }
}
