#pragma once

/*!
  \file sim.hpp
  \brief Discrete-time agent/environment evolution s' = s + psi(s, u_a, u_e, t).

  A SystemModel exposes the state increment, the two observation maps and the
  monitored signal for both double and ad::Var. Concrete systems derive from
  ModelBase, which forwards both overloads to one templated implementation so
  plain and differentiable rollouts share every arithmetic step.
*/

#include <advstl/autodiff.hpp>
#include <advstl/stl.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace advstl::sim {

/// Per-component closed intervals.
struct ActionSpace {
  std::vector<std::string> names;
  std::vector<double> lo;
  std::vector<double> hi;

  ActionSpace() = default;
  ActionSpace(std::vector<std::string> n, std::vector<double> l, std::vector<double> h)
      : names(std::move(n)), lo(std::move(l)), hi(std::move(h)) {
    if (names.size() != lo.size() || lo.size() != hi.size())
      throw std::invalid_argument("action space components disagree in size");
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (!(lo[i] <= hi[i])) throw std::invalid_argument("action bound for '" + names[i] + "' has lo > hi");
  }

  std::size_t dim() const { return lo.size(); }
};

/// Componentwise saturation into `space`.
template <class T>
std::vector<T> clamp_action(std::span<const T> u, const ActionSpace& space) {
  if (u.size() != space.dim())
    throw std::invalid_argument("action has " + std::to_string(u.size()) + " components, expected " +
                                std::to_string(space.dim()));
  std::vector<T> out;
  out.reserve(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out.push_back(ad::clamp(u[i], space.lo[i], space.hi[i]));
  return out;
}

template <class T>
std::vector<T> clamp_action(const std::vector<T>& u, const ActionSpace& space) {
  return clamp_action(std::span<const T>(u), space);
}

enum class Integrator : std::uint8_t { semi_implicit, explicit_euler };

inline Integrator parse_integrator(const std::string& s) {
  if (s == "semi_implicit") return Integrator::semi_implicit;
  if (s == "explicit_euler") return Integrator::explicit_euler;
  throw std::invalid_argument("unknown integrator '" + s + "'");
}

inline const char* to_string(Integrator i) { return i == Integrator::semi_implicit ? "semi_implicit" : "explicit_euler"; }

/// Thrown when a state component stops being finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::optional<std::size_t> step, std::string component, double value)
      : std::runtime_error(describe(step, component, value)),
        step_(step),
        component_(std::move(component)),
        value_(value) {}

  std::optional<std::size_t> step() const { return step_; }
  const std::string& component() const { return component_; }

  DivergenceError at_step(std::size_t step) const { return DivergenceError(step, component_, value_); }

 private:
  static std::string describe(std::optional<std::size_t> step, const std::string& component, double value) {
    std::string msg = "state component '" + component + "' diverged to " + std::to_string(value);
    if (step) msg += " at step " + std::to_string(*step);
    return msg;
  }

  std::optional<std::size_t> step_;
  std::string component_;
  double value_ = 0.0;
};

class SystemModel {
 public:
  virtual ~SystemModel() = default;

  virtual std::string name() const = 0;
  virtual double dt() const = 0;

  virtual std::vector<std::string> state_names() const = 0;
  virtual std::vector<std::string> monitored_names() const = 0;
  std::size_t state_dim() const { return state_names().size(); }
  std::size_t monitored_dim() const { return monitored_names().size(); }

  /// Agent action space for one controlled replica.
  virtual const ActionSpace& agent_actions() const = 0;
  virtual const ActionSpace& env_actions() const = 0;
  /// Number of agents sharing the defender (n-1 followers in a platoon chain).
  virtual std::size_t agent_replicas() const { return 1; }
  virtual std::size_t agent_obs_dim() const = 0;  // per replica
  virtual std::size_t env_obs_dim() const = 0;
  virtual std::size_t noise_dim() const = 0;

  /// Named variables drawn by the initial-state sampler and the state they induce.
  virtual std::vector<std::string> initial_variables() const = 0;
  virtual std::vector<double> make_initial_state(std::span<const double> values) const = 0;

  /// Physical validity limits per state component; leaving them is recorded, not fatal.
  virtual std::vector<std::pair<double, double>> state_limits() const {
    return std::vector<std::pair<double, double>>(state_dim(), {-std::numeric_limits<double>::infinity(),
                                                                std::numeric_limits<double>::infinity()});
  }

  virtual std::vector<double> psi(std::span<const double> s, std::span<const double> ua, std::span<const double> ue,
                                  double t) const = 0;
  virtual std::vector<ad::Var> psi(std::span<const ad::Var> s, std::span<const ad::Var> ua,
                                   std::span<const ad::Var> ue, double t) const = 0;

  /// Observations concatenated over replicas: agent_replicas() * agent_obs_dim() values.
  virtual std::vector<double> observe_agent(std::span<const double> s) const = 0;
  virtual std::vector<ad::Var> observe_agent(std::span<const ad::Var> s) const = 0;
  virtual std::vector<double> observe_env(std::span<const double> s) const = 0;
  virtual std::vector<ad::Var> observe_env(std::span<const ad::Var> s) const = 0;

  virtual std::vector<double> monitored(std::span<const double> s) const = 0;
  virtual std::vector<ad::Var> monitored(std::span<const ad::Var> s) const = 0;
};

/// Implements the virtual double/Var pairs from Derived's templated members
/// psi_impl, observe_agent_impl, observe_env_impl and monitored_impl.
template <class Derived>
class ModelBase : public SystemModel {
 public:
  std::vector<double> psi(std::span<const double> s, std::span<const double> ua, std::span<const double> ue,
                          double t) const override {
    return self().template psi_impl<double>(s, ua, ue, t);
  }
  std::vector<ad::Var> psi(std::span<const ad::Var> s, std::span<const ad::Var> ua, std::span<const ad::Var> ue,
                           double t) const override {
    return self().template psi_impl<ad::Var>(s, ua, ue, t);
  }
  std::vector<double> observe_agent(std::span<const double> s) const override {
    return self().template observe_agent_impl<double>(s);
  }
  std::vector<ad::Var> observe_agent(std::span<const ad::Var> s) const override {
    return self().template observe_agent_impl<ad::Var>(s);
  }
  std::vector<double> observe_env(std::span<const double> s) const override {
    return self().template observe_env_impl<double>(s);
  }
  std::vector<ad::Var> observe_env(std::span<const ad::Var> s) const override {
    return self().template observe_env_impl<ad::Var>(s);
  }
  std::vector<double> monitored(std::span<const double> s) const override {
    return self().template monitored_impl<double>(s);
  }
  std::vector<ad::Var> monitored(std::span<const ad::Var> s) const override {
    return self().template monitored_impl<ad::Var>(s);
  }

 private:
  const Derived& self() const { return static_cast<const Derived&>(*this); }
};

/// s + psi(s, u_a, u_e, t); throws DivergenceError naming the first non-finite component.
template <class T>
std::vector<T> step(const SystemModel& m, std::span<const T> s, std::span<const T> ua, std::span<const T> ue,
                    double t) {
  if (s.size() != m.state_dim()) throw std::invalid_argument("state dimension mismatch");
  for (std::size_t i = 0; i < s.size(); ++i)
    if (!std::isfinite(ad::value_of(s[i]))) throw DivergenceError(std::nullopt, m.state_names()[i], ad::value_of(s[i]));
  const std::vector<T> inc = m.psi(s, ua, ue, t);
  if (inc.size() != s.size()) throw std::logic_error("psi returned an increment of the wrong size");
  std::vector<T> next;
  next.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    next.push_back(s[i] + inc[i]);
    if (!std::isfinite(ad::value_of(next.back())))
      throw DivergenceError(std::nullopt, m.state_names()[i], ad::value_of(next.back()));
  }
  return next;
}

// ---------------------------------------------------------------------------
// Noise

class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  virtual std::vector<double> next(std::size_t dim) = 0;
};

/// Standard normal draws, resampled every step.
class GaussianNoise final : public NoiseSource {
 public:
  explicit GaussianNoise(std::uint64_t seed) : rng_(seed) {}
  std::vector<double> next(std::size_t dim) override {
    std::vector<double> z(dim);
    for (auto& v : z) v = normal_(rng_);
    return z;
  }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Replays a recorded noise sequence.
class ReplayNoise final : public NoiseSource {
 public:
  explicit ReplayNoise(std::vector<std::vector<double>> seq) : seq_(std::move(seq)) {}
  std::vector<double> next(std::size_t dim) override {
    if (pos_ >= seq_.size()) throw std::out_of_range("recorded noise sequence exhausted");
    if (seq_[pos_].size() != dim) throw std::invalid_argument("recorded noise has the wrong dimension");
    return seq_[pos_++];
  }

 private:
  std::vector<std::vector<double>> seq_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Rollouts

template <class T>
struct RolloutRecord {
  stl::Trajectory<T> states;     // full state, steps + 1 rows
  stl::Trajectory<T> monitored;  // monitored signal, steps + 1 rows
  std::vector<std::vector<T>> actions_a;
  std::vector<std::vector<T>> actions_e;
  std::vector<std::vector<double>> noise;
  double t0 = 0.0;
  std::optional<std::size_t> first_limit_exit;  // first step index whose state leaves state_limits()

  std::size_t steps() const { return actions_a.size(); }
};

/// Defender: (agent observation of one replica, replica index) -> action.
template <class T>
using AgentPolicy = std::function<std::vector<T>(std::span<const T>, std::size_t)>;
/// Attacker: (environment observation, noise, step index) -> action.
template <class T>
using EnvPolicy = std::function<std::vector<T>(std::span<const T>, std::span<const double>, std::size_t)>;

/// Runs `steps` steps from s0. At step j: z_j is drawn, u_e = A(o_e, z_j),
/// u_a = D(o_a) per replica, both clamped, then s_{j+1} = step(s_j, ...).
template <class T>
RolloutRecord<T> rollout(const SystemModel& m, std::span<const T> s0, const AgentPolicy<T>& defender,
                         const EnvPolicy<T>& attacker, std::size_t steps, NoiseSource& noise, double t0 = 0.0) {
  if (steps < 1) throw std::invalid_argument("rollout needs at least one step");
  if (s0.size() != m.state_dim())
    throw std::invalid_argument("initial state has " + std::to_string(s0.size()) + " components, expected " +
                                std::to_string(m.state_dim()));
  const std::size_t n = m.state_dim();
  const std::size_t replicas = m.agent_replicas();
  const std::size_t obs_a = m.agent_obs_dim();
  const auto limits = m.state_limits();

  std::vector<T> states(s0.begin(), s0.end());
  states.reserve(n * (steps + 1));
  std::vector<T> mon = m.monitored(s0);
  const std::size_t mon_dim = mon.size();
  mon.reserve(mon_dim * (steps + 1));

  std::vector<std::vector<T>> ua_log, ue_log;
  std::vector<std::vector<double>> z_log;
  ua_log.reserve(steps);
  ue_log.reserve(steps);
  z_log.reserve(steps);

  std::optional<std::size_t> exit_step;
  auto check_limits = [&](std::span<const T> s, std::size_t j) {
    if (exit_step) return;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = ad::value_of(s[i]);
      if (v < limits[i].first || v > limits[i].second) {
        exit_step = j;
        return;
      }
    }
  };
  check_limits(s0, 0);

  std::vector<T> s(s0.begin(), s0.end());
  for (std::size_t j = 0; j < steps; ++j) {
    std::vector<double> z = noise.next(m.noise_dim());
    const std::vector<T> oe = m.observe_env(s);
    const std::vector<T> ue = clamp_action(attacker(oe, z, j), m.env_actions());

    const std::vector<T> oa = m.observe_agent(s);
    if (oa.size() != replicas * obs_a) throw std::logic_error("agent observation has the wrong size");
    std::vector<T> ua;
    ua.reserve(replicas * m.agent_actions().dim());
    for (std::size_t r = 0; r < replicas; ++r) {
      auto u = clamp_action(defender(std::span<const T>(oa).subspan(r * obs_a, obs_a), r), m.agent_actions());
      ua.insert(ua.end(), u.begin(), u.end());
    }

    try {
      s = step<T>(m, s, ua, ue, t0 + static_cast<double>(j) * m.dt());
    } catch (const DivergenceError& e) {
      throw e.at_step(j);
    }
    check_limits(s, j + 1);
    states.insert(states.end(), s.begin(), s.end());
    const auto ms = m.monitored(s);
    mon.insert(mon.end(), ms.begin(), ms.end());
    ua_log.push_back(std::move(ua));
    ue_log.push_back(ue);
    z_log.push_back(std::move(z));
  }

  return RolloutRecord<T>{stl::Trajectory<T>(std::move(states), n, m.dt()),
                          stl::Trajectory<T>(std::move(mon), mon_dim, m.dt()),
                          std::move(ua_log),
                          std::move(ue_log),
                          std::move(z_log),
                          t0,
                          exit_step};
}

/// Environment policy that replays a recorded action sequence and ignores
/// observations ("fixed environment").
template <class T>
EnvPolicy<T> replay_env(std::vector<std::vector<double>> actions, ad::Tape* tape = nullptr) {
  return [actions = std::move(actions), tape](std::span<const T>, std::span<const double>, std::size_t j) {
    if (j >= actions.size())
      throw std::out_of_range("recorded environment actions end at step " + std::to_string(actions.size()));
    if constexpr (std::is_same_v<T, double>) {
      return actions[j];
    } else {
      if (tape == nullptr) throw std::invalid_argument("replayed actions on a tape need the tape");
      return tape->lift(actions[j]);
    }
  };
}

}  // namespace advstl::sim
