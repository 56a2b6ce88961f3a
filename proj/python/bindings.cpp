#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tsrl/config.hpp"
#include "tsrl/evaluation.hpp"

namespace py = pybind11;
using namespace tsrl;

namespace {

using Word = std::vector<std::set<std::string>>;

mitl::LabelSet to_labels(const std::set<std::string>& s) { return mitl::LabelSet(s.begin(), s.end()); }

std::vector<mitl::LabelSet> to_word(const Word& w) {
  std::vector<mitl::LabelSet> out;
  out.reserve(w.size());
  for (const auto& s : w) out.push_back(to_labels(s));
  return out;
}

mitl::LassoWord to_lasso(const Word& prefix, const Word& cycle) {
  if (cycle.empty()) throw py::value_error("cycle must not be empty");
  return {to_word(prefix), to_word(cycle)};
}

py::dict verdict(const WordVerdict& v) {
  py::dict d;
  d["violated"] = v.violated;
  d["step"] = v.step;
  d["cycles_completed"] = v.cycles_completed;
  d["text"] = v.str();
  return d;
}

Interval window(Tick lo, std::optional<Tick> hi) { return hi ? Interval::closed(lo, *hi) : Interval::from(lo); }

struct Trained {
  std::string qtable_json;
  std::vector<double> curve;
  std::size_t steps;
  std::string run_hash;
};

Trained train_from_config(const std::string& path, std::optional<std::uint64_t> seed,
                          std::optional<std::size_t> episodes) {
  RunConfig cfg = load_config(path);
  if (episodes) cfg.learner.episodes = *episodes;
  const std::uint64_t s = seed ? *seed : cfg.seeds.front();
  const auto inst = instantiate(cfg);
  LearnerParams params = cfg.learner;
  params.horizon = inst->horizon(cfg);
  const TrainResult res = [&] {
    py::gil_scoped_release release;
    return train(inst->product, cfg.mode, params, s);
  }();
  const KeyBuilder keys(cfg.mode, cfg.learner.history, inst->product.clock_cap());
  return {qtable_to_json(res.table, keys, qtable_meta(cfg, *inst, s)).dump(1) + "\n", res.curve.episode_reward,
          res.steps, config_hash(cfg)};
}

std::string evaluate_from_config(const std::string& path, const std::string& qtable_json, std::optional<std::size_t> n,
                                 std::optional<std::uint64_t> seed, std::optional<bool> deterministic) {
  const RunConfig cfg = load_config(path);
  const auto tj = nlohmann::json::parse(qtable_json);
  const auto& meta = tj.at("meta");
  if (meta.at("map_hash").get<std::string>() != map_hash(cfg)) throw py::value_error("map hash mismatch");
  if (meta.at("mode").get<std::string>() != to_string(cfg.mode)) throw py::value_error("learner mode mismatch");
  const auto inst = instantiate(cfg, deterministic);
  const KeyBuilder keys(cfg.mode, meta.at("history").get<std::size_t>(), meta.at("clock_cap").get<Tick>());
  const QTable table = qtable_from_json(tj, keys, cfg.learner.alpha, cfg.learner.gamma);
  GreedyPolicy policy(table, keys);
  const std::uint64_t s = seed ? *seed : meta.at("seed").get<std::uint64_t>();
  EvalReport rep;
  {
    py::gil_scoped_release release;
    rep = success_rate(inst->product, cfg.mode, policy, inst->horizon(cfg), n ? *n : cfg.eval_episodes,
                       derive_seed(s, 0x6576616c));
  }
  return report_to_json(rep, inst->automaton).dump();
}

py::dict optimal_value(const std::string& path, std::optional<double> gamma) {
  const RunConfig cfg = load_config(path);
  const auto inst = instantiate(cfg);
  const auto& aut = inst->automaton;
  const auto ep = enumerate_product(inst->env, aut, cfg.reward, aut.max_finite_bound() + 2);
  const auto vi = value_iteration(ep, gamma ? *gamma : cfg.learner.gamma, 1e-10);
  py::dict d;
  d["value"] = vi.values[ep.initial];
  d["sweeps"] = vi.sweeps;
  d["states"] = ep.states.size();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  py::register_exception<mitl::ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<UnsupportedFragment>(m, "UnsupportedFragment", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<MapError>(m, "MapError", PyExc_ValueError);

  py::class_<mitl::Formula>(m, "Formula")
      .def_static("parse", [](const std::string& text, const std::set<std::string>& alphabet) {
        return mitl::parse(text, alphabet);
      }, py::arg("text"), py::arg("alphabet"))
      .def("sexpr", &mitl::Formula::to_sexpr)
      .def_property_readonly("propositions", &mitl::Formula::propositions)
      .def("satisfied_by", [](const mitl::Formula& f, const Word& prefix, const Word& cycle, std::size_t position) {
        return mitl::satisfies(to_lasso(prefix, cycle), position, f);
      }, py::arg("prefix"), py::arg("cycle"), py::arg("position") = 0);

  py::class_<TimedLdgba>(m, "Automaton")
      .def_static("from_stages",
                  [](const std::vector<std::tuple<std::string, Tick, std::optional<Tick>>>& stages, bool strict) {
                    std::vector<Stage> out;
                    for (const auto& [p, lo, hi] : stages) out.push_back({p, window(lo, hi)});
                    return build_recurrence_automaton(out, {strict});
                  },
                  py::arg("stages"), py::arg("strict_revisit") = false)
      .def_static("from_formula",
                  [](const mitl::Formula& f, bool strict) {
                    return build_recurrence_automaton(recurrence_stages(f), {strict});
                  },
                  py::arg("formula"), py::arg("strict_revisit") = false)
      .def_property_readonly("num_states", &TimedLdgba::num_states)
      .def_property_readonly("alphabet", &TimedLdgba::alphabet)
      .def_property_readonly("max_finite_bound", &TimedLdgba::max_finite_bound)
      .def("run_word", [](const TimedLdgba& a, const Word& w) { return verdict(run_word(a, to_word(w))); })
      .def("run_lasso", [](const TimedLdgba& a, const Word& prefix, const Word& cycle) {
        return verdict(run_lasso(a, to_lasso(prefix, cycle)));
      })
      .def("dump", [](const TimedLdgba& a, const std::string& format) { return dump(a, parse_dump_format(format)); },
           py::arg("format") = "json");

  py::class_<GridWorld>(m, "GridWorld")
      .def_static("load", [](const std::string& path) { return load_map(path); })
      .def_property_readonly("width", [](const GridWorld& g) { return g.spec().width; })
      .def_property_readonly("height", [](const GridWorld& g) { return g.spec().height; })
      .def_property_readonly("actions", [](const GridWorld& g) {
        std::vector<std::string> out;
        for (Move mv : g.spec().actions) out.emplace_back(to_string(mv));
        return out;
      })
      .def_property_readonly("num_observations", &GridWorld::num_observations)
      .def("transition", [](const GridWorld& g, int x, int y, const std::string& action) {
        std::vector<std::pair<std::pair<int, int>, double>> out;
        for (const auto& w : g.transition({x, y}, move_from_string(action))) out.push_back({{w.value.x, w.value.y}, w.probability});
        return out;
      })
      .def("observation_distribution", [](const GridWorld& g, int x, int y) {
        std::vector<std::pair<std::size_t, double>> out;
        for (const auto& w : g.observation_distribution({x, y})) out.push_back({w.value, w.probability});
        return out;
      })
      .def("describe_observation", &GridWorld::describe_observation);

  py::class_<QTable>(m, "QTable")
      .def(py::init<std::size_t, double, double>(), py::arg("num_actions"), py::arg("alpha"), py::arg("gamma"))
      .def("set", [](QTable& t, std::uint64_t k, const ActionValues& v) { t.set(LearnerKey{k}, v); })
      .def("set_target", [](QTable& t, std::uint64_t k, const ActionValues& v) { t.set_target(LearnerKey{k}, v); })
      .def("values", [](const QTable& t, std::uint64_t k) { return t.values(LearnerKey{k}); })
      .def("q_update",
           [](QTable& t, std::uint64_t k, std::size_t a, double r, std::uint64_t next, bool done) {
             return t.q_update(LearnerKey{k}, a, r, LearnerKey{next}, done);
           },
           py::arg("key"), py::arg("action"), py::arg("reward"), py::arg("next_key"), py::arg("done"))
      .def("sync_target", &QTable::sync_target);

  py::class_<Trained>(m, "TrainResult")
      .def_readonly("qtable_json", &Trained::qtable_json)
      .def_readonly("episode_rewards", &Trained::curve)
      .def_readonly("steps", &Trained::steps)
      .def_readonly("config_hash", &Trained::run_hash);

  m.def("config_hash", [](const std::string& path) { return config_hash(load_config(path)); });
  m.def("train", &train_from_config, py::arg("config"), py::arg("seed") = py::none(),
        py::arg("episodes") = py::none());
  m.def("evaluate_json", &evaluate_from_config, py::arg("config"), py::arg("qtable_json"), py::arg("n") = py::none(),
        py::arg("seed") = py::none(), py::arg("deterministic") = py::none());
  m.def("optimal_value", &optimal_value, py::arg("config"), py::arg("gamma") = py::none());
}
