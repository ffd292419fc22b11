#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "boil/errors.hpp"
#include "boil/external_process.hpp"
#include "boil/objectives.hpp"
#include "boil/optimizer.hpp"
#include "boil/search_space.hpp"

// Run configuration: JSON schema, parsing with diagnostics, and the bundled
// fixture registry. Parsing and serialization round-trip exactly.

namespace boil {

struct ObjectiveConfig {
  enum class Kind { Synthetic, External };
  Kind kind = Kind::Synthetic;
  SyntheticCurveSpec synthetic;
  // external trainer process
  std::string command;
  std::string workdir = ".";
  double timeout_s = 60.0;
};

struct RunConfig {
  std::vector<Method> methods{Method::Boil};
  std::string fixture;  // empty when space/objective were given inline
  SearchSpace space;
  ObjectiveConfig objective;
  RunOptions options;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "runs";
};

// ---------------------------------------------------------------------------
// Fixture registry. The synthetic-1d / synthetic-3d fixtures drive the
// benchmark suite; the remaining three reuse published hyperparameter ranges
// as search spaces, bound to synthetic curve generators.

inline std::vector<std::string> fixture_names() {
  return {"synthetic-1d", "synthetic-3d", "cartpole-like", "reacher-like", "cnn-like"};
}

inline std::pair<SearchSpace, ObjectiveConfig> fixture(const std::string& name) {
  SearchSpace space;
  ObjectiveConfig obj;
  obj.kind = ObjectiveConfig::Kind::Synthetic;
  SyntheticCurveSpec& s = obj.synthetic;
  if (name == "synthetic-1d") {
    space.dims = {{"x0", 0.0, 1.0, AxisScale::Linear}};
    space.t_min = 40;
    space.t_max = 120;
    s.x_star = Eigen::VectorXd::Constant(1, 0.3);
    s.a = 12.0;
    s.tau0 = 15.0;
    s.b = 1.5;
    s.noise_sd = 0.02;
    s.dip_prob_base = 0.004;
    s.dip_prob_slope = 0.04;
    s.cost_base = 1.0;
    s.cost_weights = Eigen::VectorXd::Zero(1);
  } else if (name == "synthetic-3d") {
    space.dims = {{"x0", 0.0, 1.0, AxisScale::Linear},
                  {"x1", 0.0, 1.0, AxisScale::Linear},
                  {"x2", 0.0, 1.0, AxisScale::Linear}};
    space.t_min = 40;
    space.t_max = 120;
    s.x_star = Eigen::VectorXd(3);
    s.x_star << 0.3, 0.6, 0.4;
    s.a = 1.0;
    s.tau0 = 15.0;
    s.b = 1.0;
    s.noise_sd = 0.02;
    s.dip_prob_base = 0.004;
    s.dip_prob_slope = 0.04;
    s.cost_base = 1.0;
    s.cost_weights = Eigen::VectorXd::Zero(3);
  } else if (name == "cartpole-like") {
    space.dims = {{"discount", 0.8, 1.0, AxisScale::Linear},
                  {"lr", 1e-6, 1e-2, AxisScale::Log}};
    space.t_min = 300;
    space.t_max = 800;
    s.x_star = Eigen::VectorXd(2);
    s.x_star << 0.7793, 0.9425;  // discount 0.95586, lr 0.00589
    s.a = 1.0;
    s.tau0 = 80.0;
    s.b = 1.0;
    s.noise_sd = 0.02;
    s.dip_prob_base = 0.004;
    s.dip_prob_slope = 0.02;
    s.cost_base = 1.0;
    s.cost_weights = Eigen::VectorXd::Constant(2, 0.2);
  } else if (name == "reacher-like") {
    space.dims = {{"discount", 0.8, 1.0, AxisScale::Linear},
                  {"lr_actor", 1e-6, 1e-2, AxisScale::Log},
                  {"lr_critic", 1e-6, 1e-2, AxisScale::Log}};
    space.t_min = 200;
    space.t_max = 500;
    s.x_star = Eigen::VectorXd(3);
    s.x_star << 0.0, 0.7128, 0.6558;  // discount 0.8, lr 0.00071 / 0.00042
    s.a = 1.0;
    s.tau0 = 60.0;
    s.b = 1.0;
    s.noise_sd = 0.02;
    s.dip_prob_base = 0.004;
    s.dip_prob_slope = 0.02;
    s.cost_base = 1.0;
    s.cost_weights = Eigen::VectorXd::Constant(3, 0.15);
  } else if (name == "cnn-like") {
    space.dims = {{"filter_size", 1.0, 8.0, AxisScale::Linear},
                  {"pool_size", 1.0, 5.0, AxisScale::Linear},
                  {"batch_size", 16.0, 1000.0, AxisScale::Log},
                  {"lr", 1e-6, 1e-2, AxisScale::Log},
                  {"momentum", 0.8, 0.999, AxisScale::Linear},
                  {"decay", 0.9, 0.999, AxisScale::Linear}};
    space.t_min = 30;
    space.t_max = 150;
    s.x_star = Eigen::VectorXd(6);
    s.x_star << 0.5714, 1.0, 0.0, 0.6712, 0.1433, 0.7535;
    s.a = 1.0;
    s.tau0 = 25.0;
    s.b = 1.0;
    s.noise_sd = 0.02;
    s.dip_prob_base = 0.004;
    s.dip_prob_slope = 0.01;
    s.cost_base = 1.0;
    s.cost_weights = Eigen::VectorXd::Constant(6, 0.1);
  } else {
    throw InvalidInput("unknown fixture: " + name);
  }
  space.validate();
  s.validate(space);
  return {space, obj};
}

// ---------------------------------------------------------------------------
// JSON (de)serialization

namespace detail {

using ojson = nlohmann::ordered_json;

inline void require_keys(const ojson& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
  for (const auto& item : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
      throw InvalidInput("unknown key \"" + item.key() + "\" in " + where);
  }
}

inline Eigen::VectorXd vector_from_json(const ojson& j, const std::string& where) {
  if (!j.is_array()) throw InvalidInput(where + " must be an array of numbers");
  Eigen::VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

inline ojson vector_to_json(const Eigen::VectorXd& v) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline SearchSpace space_from_json(const ojson& j) {
  require_keys(j, {"dims", "t_min", "t_max"}, "space");
  SearchSpace sp;
  if (!j.contains("dims") || !j["dims"].is_array())
    throw InvalidInput("space.dims must be an array");
  for (const auto& dj : j["dims"]) {
    require_keys(dj, {"name", "lower", "upper", "scale"}, "space.dims[]");
    SpaceDim d;
    d.name = dj.at("name").get<std::string>();
    d.lower = dj.at("lower").get<double>();
    d.upper = dj.at("upper").get<double>();
    const std::string sc = dj.value("scale", std::string("linear"));
    if (sc == "linear") d.scale = AxisScale::Linear;
    else if (sc == "log") d.scale = AxisScale::Log;
    else throw InvalidInput("space scale must be \"linear\" or \"log\", got \"" + sc + "\"");
    sp.dims.push_back(d);
  }
  sp.t_min = j.at("t_min").get<int>();
  sp.t_max = j.at("t_max").get<int>();
  sp.validate();
  return sp;
}

inline ojson space_to_json(const SearchSpace& sp) {
  ojson j;
  j["dims"] = ojson::array();
  for (const auto& d : sp.dims) {
    ojson dj;
    dj["name"] = d.name;
    dj["lower"] = d.lower;
    dj["upper"] = d.upper;
    dj["scale"] = d.scale == AxisScale::Log ? "log" : "linear";
    j["dims"].push_back(dj);
  }
  j["t_min"] = sp.t_min;
  j["t_max"] = sp.t_max;
  return j;
}

inline ObjectiveConfig objective_from_json(const ojson& j, const SearchSpace& space) {
  ObjectiveConfig o;
  const std::string type = j.value("type", std::string("synthetic"));
  if (type == "synthetic") {
    require_keys(j,
                 {"type", "x_star", "a", "tau0", "b", "noise_sd", "dip_prob_base",
                  "dip_prob_slope", "dip_depth_frac", "dip_len_p", "cost_base",
                  "cost_weights"},
                 "objective");
    o.kind = ObjectiveConfig::Kind::Synthetic;
    SyntheticCurveSpec& s = o.synthetic;
    s.x_star = vector_from_json(j.at("x_star"), "objective.x_star");
    s.a = j.value("a", s.a);
    s.tau0 = j.value("tau0", s.tau0);
    s.b = j.value("b", s.b);
    s.noise_sd = j.value("noise_sd", s.noise_sd);
    s.dip_prob_base = j.value("dip_prob_base", s.dip_prob_base);
    s.dip_prob_slope = j.value("dip_prob_slope", s.dip_prob_slope);
    s.dip_depth_frac = j.value("dip_depth_frac", s.dip_depth_frac);
    s.dip_len_p = j.value("dip_len_p", s.dip_len_p);
    s.cost_base = j.value("cost_base", s.cost_base);
    if (j.contains("cost_weights"))
      s.cost_weights = vector_from_json(j.at("cost_weights"), "objective.cost_weights");
    else
      s.cost_weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space.dim()));
    s.validate(space);
  } else if (type == "external") {
    require_keys(j, {"type", "command", "workdir", "timeout_s"}, "objective");
    o.kind = ObjectiveConfig::Kind::External;
    o.command = j.at("command").get<std::string>();
    o.workdir = j.value("workdir", std::string("."));
    o.timeout_s = j.value("timeout_s", 60.0);
    if (o.command.empty()) throw InvalidInput("objective.command must be non-empty");
    if (!(o.timeout_s > 0)) throw InvalidInput("objective.timeout_s must be positive");
  } else {
    throw InvalidInput("objective.type must be \"synthetic\" or \"external\"");
  }
  return o;
}

inline ojson objective_to_json(const ObjectiveConfig& o) {
  ojson j;
  if (o.kind == ObjectiveConfig::Kind::Synthetic) {
    const SyntheticCurveSpec& s = o.synthetic;
    j["type"] = "synthetic";
    j["x_star"] = vector_to_json(s.x_star);
    j["a"] = s.a;
    j["tau0"] = s.tau0;
    j["b"] = s.b;
    j["noise_sd"] = s.noise_sd;
    j["dip_prob_base"] = s.dip_prob_base;
    j["dip_prob_slope"] = s.dip_prob_slope;
    j["dip_depth_frac"] = s.dip_depth_frac;
    j["dip_len_p"] = s.dip_len_p;
    j["cost_base"] = s.cost_base;
    j["cost_weights"] = vector_to_json(s.cost_weights);
  } else {
    j["type"] = "external";
    j["command"] = o.command;
    j["workdir"] = o.workdir;
    j["timeout_s"] = o.timeout_s;
  }
  return j;
}

inline Preference::Kind preference_from_json(const ojson& j, int& window) {
  std::string kind;
  if (j.is_string()) {
    kind = j.get<std::string>();
  } else if (j.is_object()) {
    require_keys(j, {"kind", "window"}, "preference");
    kind = j.at("kind").get<std::string>();
    window = j.value("window", window);
  } else {
    throw InvalidInput("preference must be a string or an object");
  }
  if (kind == "sigmoid") return Preference::Kind::Sigmoid;
  if (kind == "log") return Preference::Kind::Log;
  if (kind == "average") {
    if (window < 1) throw InvalidInput("preference window must be >= 1");
    return Preference::Kind::Average;
  }
  throw InvalidInput("preference must be sigmoid, log, or average, got \"" + kind + "\"");
}

inline ojson preference_to_json(Preference::Kind kind, int window) {
  ojson j;
  switch (kind) {
    case Preference::Kind::Sigmoid: j["kind"] = "sigmoid"; break;
    case Preference::Kind::Log: j["kind"] = "log"; break;
    case Preference::Kind::Average:
      j["kind"] = "average";
      j["window"] = window;
      break;
  }
  return j;
}

}  // namespace detail

inline RunConfig run_config_from_json(const detail::ojson& j) {
  using detail::ojson;
  if (!j.is_object()) throw InvalidInput("config root must be a JSON object");
  detail::require_keys(j,
                       {"method", "methods", "fixture", "space", "objective", "n", "m",
                        "delta", "same_x_tol", "cost_budget", "preference", "kernel",
                        "seeds", "output_dir"},
                       "config");
  RunConfig c;

  c.methods.clear();
  if (j.contains("methods")) {
    for (const auto& m : j["methods"]) c.methods.push_back(method_from_name(m.get<std::string>()));
  }
  if (j.contains("method")) c.methods.push_back(method_from_name(j["method"].get<std::string>()));
  if (c.methods.empty()) c.methods.push_back(Method::Boil);

  if (j.contains("fixture")) {
    c.fixture = j["fixture"].get<std::string>();
    std::tie(c.space, c.objective) = fixture(c.fixture);
  } else {
    if (!j.contains("space"))
      throw InvalidInput("config needs either \"fixture\" or an inline \"space\"");
    c.space = detail::space_from_json(j["space"]);
    if (j.contains("objective")) {
      c.objective = detail::objective_from_json(j["objective"], c.space);
    } else {
      throw InvalidInput("config with inline space needs an \"objective\"");
    }
  }

  c.options.n_evals = j.value("n", c.options.n_evals);
  c.options.max_augment = j.value("m", c.options.max_augment);
  c.options.delta = j.value("delta", c.options.delta);
  c.options.same_x_tol = j.value("same_x_tol", c.options.same_x_tol);
  c.options.cost_budget = j.value("cost_budget", c.options.cost_budget);
  if (j.contains("preference"))
    c.options.preference = detail::preference_from_json(j["preference"], c.options.avg_window);
  if (j.contains("kernel")) {
    const std::string k = j["kernel"].get<std::string>();
    if (k == "se-product") c.options.kernel = KernelKind::SeProduct;
    else if (k == "freeze-thaw-t") c.options.kernel = KernelKind::FreezeThawTime;
    else throw InvalidInput("kernel must be \"se-product\" or \"freeze-thaw-t\", got \"" + k + "\"");
  }

  if (j.contains("seeds")) {
    c.seeds.clear();
    for (const auto& s : j["seeds"]) c.seeds.push_back(s.get<std::uint64_t>());
  }
  if (c.seeds.empty()) throw InvalidInput("seeds must be non-empty");
  c.output_dir = j.value("output_dir", c.output_dir);

  if (c.options.n_evals < 1) throw InvalidInput("n must be >= 1");
  if (c.options.max_augment < 0) throw InvalidInput("m must be >= 0");
  if (!(c.options.delta > 0)) throw InvalidInput("delta must be positive");
  return c;
}

inline detail::ojson run_config_to_json(const RunConfig& c) {
  using detail::ojson;
  ojson j;
  j["methods"] = ojson::array();
  for (Method m : c.methods) j["methods"].push_back(method_name(m));
  if (!c.fixture.empty()) j["fixture"] = c.fixture;
  j["space"] = detail::space_to_json(c.space);
  j["objective"] = detail::objective_to_json(c.objective);
  j["n"] = c.options.n_evals;
  j["m"] = c.options.max_augment;
  j["delta"] = c.options.delta;
  j["same_x_tol"] = c.options.same_x_tol;
  if (std::isfinite(c.options.cost_budget)) j["cost_budget"] = c.options.cost_budget;
  j["preference"] = detail::preference_to_json(c.options.preference, c.options.avg_window);
  j["kernel"] = c.options.kernel == KernelKind::FreezeThawTime ? "freeze-thaw-t" : "se-product";
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  return j;
}

inline RunConfig parse_run_config(const std::string& text) {
  detail::ojson j;
  try {
    j = detail::ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    return run_config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("config field error: ") + e.what());
  }
}

inline std::string serialize_run_config(const RunConfig& c) {
  return run_config_to_json(c).dump(2) + "\n";
}

// Builds the objective bound to one (seed, run). Synthetic objectives draw all
// randomness from the seed; external ones pass it through the wire protocol.
inline std::unique_ptr<Objective> make_objective(const RunConfig& c, std::uint64_t seed) {
  if (c.objective.kind == ObjectiveConfig::Kind::Synthetic)
    return std::make_unique<SyntheticObjective>(c.objective.synthetic, c.space, seed);
  return std::make_unique<ExternalObjective>(c.objective.command, c.objective.workdir,
                                             c.objective.timeout_s, c.space, seed);
}

}  // namespace boil
