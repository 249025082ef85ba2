#pragma once

/*!
  \file config.hpp
  \brief Experiment configuration: strict JSON schema, named presets, hashing.

  A config either names a preset and overrides some of its fields, or names a
  system and overrides that system's defaults. Unknown keys are errors.
*/

#include <advstl/io/formula_json.hpp>
#include <advstl/policy.hpp>
#include <advstl/random.hpp>
#include <advstl/stl.hpp>
#include <advstl/systems/baselines.hpp>
#include <advstl/systems/cartpole.hpp>
#include <advstl/systems/platoon.hpp>
#include <advstl/train.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

namespace advstl::io {

using nlohmann::json;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class SystemKind { cartpole, platoon_basic, platoon_energy, platoon_chain };

inline const char* to_string(SystemKind k) {
  switch (k) {
    case SystemKind::cartpole: return "cartpole";
    case SystemKind::platoon_basic: return "platoon_basic";
    case SystemKind::platoon_energy: return "platoon_energy";
    case SystemKind::platoon_chain: return "platoon_chain";
  }
  return "?";
}

inline SystemKind parse_system(const std::string& s) {
  for (auto k : {SystemKind::cartpole, SystemKind::platoon_basic, SystemKind::platoon_energy, SystemKind::platoon_chain})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown system '" + s + "' (cartpole, platoon_basic, platoon_energy, platoon_chain)");
}

enum class TestMode { adversarial, fixed_env };

inline const char* to_string(TestMode m) { return m == TestMode::adversarial ? "adversarial" : "fixed-env"; }

inline TestMode parse_test_mode(const std::string& s) {
  if (s == "adversarial") return TestMode::adversarial;
  if (s == "fixed-env") return TestMode::fixed_env;
  throw ConfigError("unknown test mode '" + s + "' (adversarial, fixed-env)");
}

struct NetworkConfig {
  std::vector<std::size_t> hidden;
  double leaky_slope = ad::default_leaky_slope;
  bool operator==(const NetworkConfig&) const = default;
};

struct RequirementConfig {
  std::string name;
  double weight = 1.0;
  json formula;
};

struct TestSettings {
  std::size_t n = 1000;
  std::size_t horizon = 200;
  TestMode mode = TestMode::adversarial;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct ExperimentConfig {
  SystemKind system = SystemKind::cartpole;
  std::size_t cars = 2;  // platoon_chain only
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  // Training schedule and optimizer; the sampler and seed inside are filled by build().
  train::TrainConfig train;
  std::map<std::string, std::pair<double, double>> initial_state;
  NetworkConfig attacker{{10}};
  NetworkConfig defender{{10, 10}};

  systems::CartPoleParams cartpole;
  systems::PlatoonParams platoon;

  // Replaces the built-in requirements when present.
  std::optional<std::vector<RequirementConfig>> requirements;
  std::vector<std::string> window_relative;

  systems::PidGains pid;
  systems::SmcGains smc;
  TestSettings test;
};

// ---------------------------------------------------------------------------
// Presets

inline ExperimentConfig cartpole_defaults() {
  ExperimentConfig c;
  c.system = SystemKind::cartpole;
  c.train.horizon = 40;
  c.train.window = 10;
  c.train.iterations = 500;
  c.train.attacker_steps = 1;
  c.train.defender_steps = 2;
  c.initial_state = {{"x", {-1.0, 1.0}}, {"x_dot", {-1.0, 1.0}}, {"theta", {-0.1, 0.1}}, {"theta_dot", {-1.0, 1.0}}};
  return c;
}

inline ExperimentConfig platoon_defaults(SystemKind k, std::size_t cars = 2) {
  ExperimentConfig c;
  c.system = k;
  c.cars = cars;
  c.train.horizon = 40;
  c.train.window = 10;
  c.train.iterations = 1000;
  c.train.attacker_steps = 1;
  c.train.defender_steps = 2;
  if (k == SystemKind::platoon_chain && cars > 2) {
    for (std::size_t i = 1; i < cars; ++i) c.initial_state["d_" + std::to_string(i)] = {2.0, 6.0};
    for (std::size_t i = 0; i < cars; ++i) c.initial_state["v_" + std::to_string(i)] = {15.0, 20.0};
  } else {
    c.initial_state = {{"d", {2.0, 6.0}}, {"v_l", {15.0, 20.0}}, {"v_f", {15.0, 20.0}}};
  }
  return c;
}

inline std::vector<std::string> preset_names() { return {"cartpole_table1", "platoon_table2"}; }

inline ExperimentConfig preset(std::string_view name) {
  if (name == "cartpole_table1") return cartpole_defaults();
  if (name == "platoon_table2") return platoon_defaults(SystemKind::platoon_energy);
  throw ConfigError("unknown preset '" + std::string(name) + "' (cartpole_table1, platoon_table2)");
}

inline ExperimentConfig system_defaults(SystemKind k, std::size_t cars = 2) {
  return k == SystemKind::cartpole ? cartpole_defaults() : platoon_defaults(k, cars);
}

// ---------------------------------------------------------------------------
// Strict object reading

namespace detail {

class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  template <class T>
  Fields& opt(const char* key, T& out) {
    if (auto it = j_.find(key); it != j_.end()) {
      used_.insert(key);
      out = convert<T>(*it, where_ + "." + key);
    }
    return *this;
  }

  const json* sub(const char* key) {
    if (auto it = j_.find(key); it != j_.end()) {
      used_.insert(key);
      return &*it;
    }
    return nullptr;
  }

  void done() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where_);
  }

  template <class T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where + " must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_unsigned()) throw ConfigError(where + " must be a non-negative integer");
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where + " must be a number");
      const double d = v.get<double>();
      if (!std::isfinite(d)) throw ConfigError(where + " must be finite");
      return d;
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where + " must be a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
      if (!v.is_array()) throw ConfigError(where + " must be an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i) out.push_back(convert<std::size_t>(v[i], where + "[" + std::to_string(i) + "]"));
      return out;
    } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
      if (!v.is_array()) throw ConfigError(where + " must be an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i) out.push_back(convert<std::string>(v[i], where + "[" + std::to_string(i) + "]"));
      return out;
    } else if constexpr (std::is_same_v<T, sim::Integrator>) {
      try {
        return sim::parse_integrator(convert<std::string>(v, where));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
      }
    } else {
      static_assert(sizeof(T) == 0, "unsupported config field type");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

inline void read(const json& j, train::TrainConfig& t) {
  Fields f(j, "train");
  f.opt("horizon", t.horizon).opt("window", t.window).opt("iterations", t.iterations);
  f.opt("attacker_steps", t.attacker_steps).opt("defender_steps", t.defender_steps);
  f.opt("attacker_lr", t.attacker_opt.learning_rate).opt("defender_lr", t.defender_opt.learning_rate);
  double b1 = t.attacker_opt.beta1, b2 = t.attacker_opt.beta2, eps = t.attacker_opt.epsilon;
  f.opt("beta1", b1).opt("beta2", b2).opt("epsilon", eps);
  for (auto* o : {&t.attacker_opt, &t.defender_opt}) {
    o->beta1 = b1;
    o->beta2 = b2;
    o->epsilon = eps;
  }
  f.opt("grad_clip", t.grad_clip).opt("max_retries", t.max_retries);
  f.done();
}

inline json write(const train::TrainConfig& t) {
  return {{"horizon", t.horizon},
          {"window", t.window},
          {"iterations", t.iterations},
          {"attacker_steps", t.attacker_steps},
          {"defender_steps", t.defender_steps},
          {"attacker_lr", t.attacker_opt.learning_rate},
          {"defender_lr", t.defender_opt.learning_rate},
          {"beta1", t.attacker_opt.beta1},
          {"beta2", t.attacker_opt.beta2},
          {"epsilon", t.attacker_opt.epsilon},
          {"grad_clip", t.grad_clip},
          {"max_retries", t.max_retries}};
}

inline void read(const json& j, NetworkConfig& n, const std::string& where) {
  Fields f(j, where);
  f.opt("hidden", n.hidden).opt("leaky_slope", n.leaky_slope).done();
}

inline json write(const NetworkConfig& n) { return {{"hidden", n.hidden}, {"leaky_slope", n.leaky_slope}}; }

inline void read(const json& j, systems::CartPoleParams& p) {
  Fields f(j, "cartpole");
  f.opt("cart_mass", p.cart_mass).opt("pole_mass", p.pole_mass).opt("half_length", p.half_length);
  f.opt("gravity", p.gravity).opt("dt", p.dt).opt("integrator", p.integrator);
  f.opt("force_max", p.force_max).opt("friction_min", p.friction_min).opt("friction_max", p.friction_max);
  f.opt("target_rate_max", p.target_rate_max);
  f.opt("x_limit", p.x_limit).opt("x_dot_limit", p.x_dot_limit).opt("theta_limit", p.theta_limit);
  f.opt("dist_min", p.dist_min).opt("dist_max", p.dist_max).opt("theta_min", p.theta_min).opt("theta_max", p.theta_max);
  f.opt("alpha", p.alpha).opt("relative_observation", p.relative_observation);
  f.done();
}

inline json write(const systems::CartPoleParams& p) {
  return {{"cart_mass", p.cart_mass},       {"pole_mass", p.pole_mass},
          {"half_length", p.half_length},   {"gravity", p.gravity},
          {"dt", p.dt},                     {"integrator", sim::to_string(p.integrator)},
          {"force_max", p.force_max},       {"friction_min", p.friction_min},
          {"friction_max", p.friction_max}, {"target_rate_max", p.target_rate_max},
          {"x_limit", p.x_limit},           {"x_dot_limit", p.x_dot_limit},
          {"theta_limit", p.theta_limit},   {"dist_min", p.dist_min},
          {"dist_max", p.dist_max},         {"theta_min", p.theta_min},
          {"theta_max", p.theta_max},       {"alpha", p.alpha},
          {"relative_observation", p.relative_observation}};
}

inline void read(const json& j, systems::EfficiencyMap& e) {
  Fields f(j, "platoon.vehicle.efficiency");
  f.opt("torque_max", e.torque_max).opt("speed_max_rpm", e.speed_max_rpm).opt("peak", e.peak).opt("edge", e.edge);
  f.opt("peak_torque_frac", e.peak_torque_frac).opt("peak_speed_frac", e.peak_speed_frac);
  f.done();
}

inline json write(const systems::EfficiencyMap& e) {
  return {{"torque_max", e.torque_max},
          {"speed_max_rpm", e.speed_max_rpm},
          {"peak", e.peak},
          {"edge", e.edge},
          {"peak_torque_frac", e.peak_torque_frac},
          {"peak_speed_frac", e.peak_speed_frac}};
}

inline void read(const json& j, systems::VehicleParams& v) {
  Fields f(j, "platoon.vehicle");
  f.opt("mass", v.mass).opt("wheel_radius", v.wheel_radius).opt("gear_ratio", v.gear_ratio);
  f.opt("rolling_coeff", v.rolling_coeff).opt("air_density", v.air_density).opt("drag_coeff", v.drag_coeff);
  f.opt("frontal_area", v.frontal_area).opt("brake_torque_max", v.brake_torque_max);
  if (auto* e = f.sub("efficiency")) read(*e, v.efficiency);
  f.done();
}

inline json write(const systems::VehicleParams& v) {
  return {{"mass", v.mass},
          {"wheel_radius", v.wheel_radius},
          {"gear_ratio", v.gear_ratio},
          {"rolling_coeff", v.rolling_coeff},
          {"air_density", v.air_density},
          {"drag_coeff", v.drag_coeff},
          {"frontal_area", v.frontal_area},
          {"brake_torque_max", v.brake_torque_max},
          {"efficiency", write(v.efficiency)}};
}

inline void read(const json& j, systems::PlatoonParams& p) {
  Fields f(j, "platoon");
  f.opt("dt", p.dt).opt("gravity", p.gravity).opt("friction", p.friction);
  f.opt("accel_min", p.accel_min).opt("accel_max", p.accel_max).opt("speed_min", p.speed_min).opt("speed_max", p.speed_max);
  f.opt("integrator", p.integrator);
  f.opt("dist_min", p.dist_min).opt("dist_max", p.dist_max).opt("energy_max", p.energy_max).opt("alpha", p.alpha);
  if (auto* v = f.sub("vehicle")) read(*v, p.vehicle);
  f.done();
}

inline json write(const systems::PlatoonParams& p) {
  return {{"dt", p.dt},
          {"gravity", p.gravity},
          {"friction", p.friction},
          {"accel_min", p.accel_min},
          {"accel_max", p.accel_max},
          {"speed_min", p.speed_min},
          {"speed_max", p.speed_max},
          {"integrator", sim::to_string(p.integrator)},
          {"dist_min", p.dist_min},
          {"dist_max", p.dist_max},
          {"energy_max", p.energy_max},
          {"alpha", p.alpha},
          {"vehicle", write(p.vehicle)}};
}

inline void read(const json& j, systems::PidGains& g) {
  Fields f(j, "baselines.pid");
  f.opt("kp", g.kp).opt("ki", g.ki).opt("kd", g.kd).opt("target_distance", g.target_distance);
  f.opt("integral_limit", g.integral_limit).opt("integral_zone", g.integral_zone).opt("feedforward", g.feedforward);
  f.opt("accel_min", g.accel_min).opt("accel_max", g.accel_max);
  f.done();
}

inline json write(const systems::PidGains& g) {
  return {{"kp", g.kp},
          {"ki", g.ki},
          {"kd", g.kd},
          {"target_distance", g.target_distance},
          {"integral_limit", g.integral_limit},
          {"integral_zone", g.integral_zone},
          {"feedforward", g.feedforward},
          {"accel_min", g.accel_min},
          {"accel_max", g.accel_max}};
}

inline void read(const json& j, systems::SmcGains& g) {
  Fields f(j, "baselines.smc");
  f.opt("gain", g.gain).opt("lambda", g.lambda).opt("boundary", g.boundary).done();
}

inline json write(const systems::SmcGains& g) {
  return {{"gain", g.gain}, {"lambda", g.lambda}, {"boundary", g.boundary}};
}

inline void read(const json& j, TestSettings& t) {
  Fields f(j, "test");
  std::string mode = to_string(t.mode);
  f.opt("n", t.n).opt("horizon", t.horizon).opt("mode", mode).opt("threads", t.threads).done();
  t.mode = parse_test_mode(mode);
}

inline json write(const TestSettings& t) {
  return {{"n", t.n}, {"horizon", t.horizon}, {"mode", to_string(t.mode)}, {"threads", t.threads}};
}

inline void read_ranges(const json& j, std::map<std::string, std::pair<double, double>>& out) {
  if (!j.is_object()) throw ConfigError("initial_state must be an object of [lo, hi] ranges");
  out.clear();
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& r = it.value();
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number())
      throw ConfigError("initial_state." + it.key() + " must be [lo, hi]");
    const double lo = r[0].get<double>(), hi = r[1].get<double>();
    if (!(lo <= hi)) throw ConfigError("initial_state." + it.key() + " has lo > hi");
    out[it.key()] = {lo, hi};
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Parse / serialize

inline ExperimentConfig parse_config(const json& j) {
  using detail::Fields;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  Fields top(j, "config");

  std::string preset_name, system_name;
  std::size_t cars = 2;
  top.opt("preset", preset_name).opt("system", system_name).opt("cars", cars);

  ExperimentConfig c;
  if (!preset_name.empty()) {
    c = preset(preset_name);
    if (!system_name.empty() && parse_system(system_name) != c.system)
      throw ConfigError("system '" + system_name + "' conflicts with preset '" + preset_name + "'");
  } else if (!system_name.empty()) {
    c = system_defaults(parse_system(system_name), cars);
  } else {
    throw ConfigError("config needs a 'preset' or a 'system'");
  }
  c.cars = cars;
  if (c.system == SystemKind::platoon_chain && cars < 2) throw ConfigError("platoon_chain needs cars >= 2");
  if (c.system != SystemKind::platoon_chain && cars != 2) throw ConfigError("'cars' applies to platoon_chain only");

  top.opt("seed", c.seed).opt("output_dir", c.output_dir);
  if (auto* t = top.sub("train")) detail::read(*t, c.train);
  if (auto* r = top.sub("initial_state")) detail::read_ranges(*r, c.initial_state);
  if (auto* n = top.sub("networks")) {
    Fields nf(*n, "networks");
    if (auto* a = nf.sub("attacker")) detail::read(*a, c.attacker, "networks.attacker");
    if (auto* d = nf.sub("defender")) detail::read(*d, c.defender, "networks.defender");
    nf.done();
  }
  if (auto* p = top.sub("cartpole")) {
    if (c.system != SystemKind::cartpole) throw ConfigError("'cartpole' block given for system " + std::string(to_string(c.system)));
    detail::read(*p, c.cartpole);
  }
  if (auto* p = top.sub("platoon")) {
    if (c.system == SystemKind::cartpole) throw ConfigError("'platoon' block given for system cartpole");
    detail::read(*p, c.platoon);
  }
  if (auto* r = top.sub("requirements")) {
    if (!r->is_array() || r->empty()) throw ConfigError("requirements must be a non-empty array");
    std::vector<RequirementConfig> reqs;
    for (std::size_t i = 0; i < r->size(); ++i) {
      const std::string where = "requirements[" + std::to_string(i) + "]";
      Fields rf((*r)[i], where);
      RequirementConfig rc;
      rf.opt("name", rc.name).opt("weight", rc.weight);
      const json* f = rf.sub("formula");
      if (!f) throw ConfigError(where + " needs a formula");
      if (rc.name.empty()) throw ConfigError(where + " needs a name");
      rc.formula = *f;
      rf.done();
      reqs.push_back(std::move(rc));
    }
    c.requirements = std::move(reqs);
  }
  top.opt("window_relative", c.window_relative);
  if (!c.window_relative.empty() && !c.requirements)
    throw ConfigError("window_relative applies only together with custom requirements");
  if (auto* b = top.sub("baselines")) {
    Fields bf(*b, "baselines");
    if (auto* p = bf.sub("pid")) detail::read(*p, c.pid);
    if (auto* s = bf.sub("smc")) detail::read(*s, c.smc);
    bf.done();
  }
  if (auto* t = top.sub("test")) detail::read(*t, c.test);
  top.done();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

/// Fully resolved config; parse_config(to_json(c)) reproduces c.
inline json to_json(const ExperimentConfig& c) {
  json j{{"system", to_string(c.system)},
         {"seed", c.seed},
         {"output_dir", c.output_dir},
         {"train", detail::write(c.train)},
         {"networks", {{"attacker", detail::write(c.attacker)}, {"defender", detail::write(c.defender)}}},
         {"test", detail::write(c.test)}};
  if (c.system == SystemKind::platoon_chain) j["cars"] = c.cars;
  json ranges = json::object();
  for (auto& [k, r] : c.initial_state) ranges[k] = {r.first, r.second};
  j["initial_state"] = ranges;
  if (c.system == SystemKind::cartpole) {
    j["cartpole"] = detail::write(c.cartpole);
    j["baselines"] = {{"smc", detail::write(c.smc)}};
  } else {
    j["platoon"] = detail::write(c.platoon);
    j["baselines"] = {{"pid", detail::write(c.pid)}};
  }
  if (c.requirements) {
    json r = json::array();
    for (auto& q : *c.requirements) r.push_back({{"name", q.name}, {"weight", q.weight}, {"formula", q.formula}});
    j["requirements"] = r;
    if (!c.window_relative.empty()) j["window_relative"] = c.window_relative;
  }
  return j;
}

/// Identifies the experiment (system, requirements, training and network
/// settings); seed, test settings and output directory do not contribute.
inline std::uint64_t config_hash(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("seed");
  j.erase("test");
  j.erase("output_dir");
  return fnv1a(j.dump());
}

inline std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

// ---------------------------------------------------------------------------
// Instantiation

struct Experiment {
  std::shared_ptr<const sim::SystemModel> model;
  std::shared_ptr<const stl::RequirementSet> requirements;
  policy::MlpSpec attacker;
  policy::MlpSpec defender;
  train::TrainConfig train;  // sampler and seed filled in
};

inline std::shared_ptr<const sim::SystemModel> make_model(const ExperimentConfig& c) {
  switch (c.system) {
    case SystemKind::cartpole: return std::make_shared<systems::CartPole>(c.cartpole);
    case SystemKind::platoon_basic: return std::make_shared<systems::PlatoonBasic>(c.platoon);
    case SystemKind::platoon_energy: return std::make_shared<systems::PlatoonEnergy>(c.platoon);
    case SystemKind::platoon_chain: return std::make_shared<systems::PlatoonChain>(c.cars, c.platoon);
  }
  throw ConfigError("unknown system");
}

inline Experiment build(const ExperimentConfig& c) {
  Experiment e;
  try {
    e.model = make_model(c);
  } catch (const std::invalid_argument& err) {
    throw ConfigError(std::string("system parameters: ") + err.what());
  }
  const auto& m = *e.model;
  const std::size_t h = c.train.window;
  if (h == 0) throw ConfigError("train.window must be positive");

  try {
    if (c.requirements) {
      const auto names = m.monitored_names();
      std::vector<stl::Requirement> items;
      for (auto& r : *c.requirements) items.push_back({r.name, formula_from_json(r.formula, names), r.weight});
      std::vector<std::size_t> rel;
      for (auto& n : c.window_relative) rel.push_back(detail::signal_index(names, json(n)));
      e.requirements = std::make_shared<stl::RequirementSet>(std::move(items), h, std::move(rel));
    } else if (c.system == SystemKind::cartpole) {
      e.requirements = std::make_shared<stl::RequirementSet>(systems::cartpole_requirements(c.cartpole, h));
    } else if (c.system == SystemKind::platoon_chain) {
      e.requirements = std::make_shared<stl::RequirementSet>(
          systems::platoon_chain_requirements(static_cast<const systems::PlatoonChain&>(m), h));
    } else {
      e.requirements = std::make_shared<stl::RequirementSet>(
          systems::platoon_requirements(c.platoon, h, c.system == SystemKind::platoon_energy));
    }
  } catch (const FormulaError& err) {
    throw ConfigError(std::string("requirements: ") + err.what());
  } catch (const std::invalid_argument& err) {
    throw ConfigError(std::string("requirements: ") + err.what());
  }

  std::vector<std::string> names;
  std::vector<std::pair<double, double>> ranges;
  for (const auto& v : m.initial_variables()) {
    auto it = c.initial_state.find(v);
    if (it == c.initial_state.end()) throw ConfigError("initial_state is missing a range for '" + v + "'");
    names.push_back(v);
    ranges.push_back(it->second);
  }
  if (c.initial_state.size() != names.size()) {
    for (auto& [k, r] : c.initial_state)
      if (std::find(names.begin(), names.end(), k) == names.end())
        throw ConfigError("initial_state has unknown variable '" + k + "'");
  }

  e.attacker = policy::MlpSpec{m.env_obs_dim() + m.noise_dim(), c.attacker.hidden, m.env_actions().lo,
                               m.env_actions().hi, c.attacker.leaky_slope};
  e.defender = policy::MlpSpec{m.agent_obs_dim(), c.defender.hidden, m.agent_actions().lo, m.agent_actions().hi,
                               c.defender.leaky_slope};
  try {
    e.attacker.validate();
    e.defender.validate();
    e.train = c.train;
    e.train.sampler = InitialStateSampler(std::move(names), std::move(ranges));
    e.train.seed = c.seed;
    e.train.validate();
  } catch (const std::invalid_argument& err) {
    throw ConfigError(err.what());
  }
  if (c.test.horizon < 1) throw ConfigError("test.horizon must be at least 1");
  return e;
}

}  // namespace advstl::io
