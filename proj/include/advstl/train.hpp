#pragma once

/*!
  \file train.hpp
  \brief Attacker/defender minmax training and test-set evaluation.

  The objective of one rollout of H steps is

    J = sum_{t=0}^{H-h} R_Phi(xi[t, t+h-1])

  where R_Phi is the weighted combined robustness of the requirement set and
  h its window. Windows are cut from a single rollout: with deterministic
  policies and the noise fixed along that rollout, re-simulating each window
  from s_t would reproduce the same segment.

  Each outer iteration samples s0, then runs the attacker updates (descent on
  J) followed by the defender updates (ascent on J), each on a fresh rollout
  with fresh noise from the same s0.
*/

#include <advstl/autodiff.hpp>
#include <advstl/optim.hpp>
#include <advstl/policy.hpp>
#include <advstl/random.hpp>
#include <advstl/sim.hpp>
#include <advstl/stl.hpp>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace advstl::train {

// ---------------------------------------------------------------------------
// Objective

/// Sum of combined robustness over the H - h + 1 windows of h states starting
/// at 0..H-h. `monitored` must hold at least H states.
template <class T>
T windowed_objective(const stl::RequirementSet& reqs, const stl::Trajectory<T>& monitored, std::size_t horizon) {
  const std::size_t h = reqs.window();
  if (horizon < h) throw std::invalid_argument("horizon must be at least the requirement window");
  if (monitored.length() < horizon) throw std::invalid_argument("trajectory shorter than the horizon");
  const auto& rel = reqs.window_relative();
  T total = stl::combined_robustness(reqs, monitored.window(0, h, rel), 0);
  for (std::size_t t = 1; t + h <= horizon; ++t)
    total = total + stl::combined_robustness(reqs, monitored.window(t, h, rel), 0);
  return total;
}

inline sim::AgentPolicy<double> agent_policy(const policy::Policy& d) {
  return [&d](std::span<const double> o, std::size_t) {
    return policy::defender_forward<double>(d.net, d.params, o);
  };
}

inline sim::EnvPolicy<double> env_policy(const policy::Policy& a) {
  return [&a](std::span<const double> o, std::span<const double> z, std::size_t) {
    return policy::attacker_forward<double>(a.net, a.params, o, z);
  };
}

/// Differentiable rollout with both parameter vectors on the tape.
inline sim::RolloutRecord<ad::Var> rollout_on_tape(ad::Tape& tape, const sim::SystemModel& m,
                                                   std::span<const double> s0, const policy::Mlp& attacker,
                                                   std::span<const ad::Var> theta_a, const policy::Mlp& defender,
                                                   std::span<const ad::Var> theta_d, std::size_t steps,
                                                   sim::NoiseSource& noise) {
  const std::vector<ad::Var> s0v = tape.lift(s0);
  sim::AgentPolicy<ad::Var> d = [&](std::span<const ad::Var> o, std::size_t) {
    return policy::defender_forward<ad::Var>(defender, theta_d, o);
  };
  sim::EnvPolicy<ad::Var> a = [&](std::span<const ad::Var> o, std::span<const double> z, std::size_t) {
    const auto zv = tape.lift(z);
    return policy::attacker_forward<ad::Var>(attacker, theta_a, o, zv);
  };
  return sim::rollout<ad::Var>(m, s0v, d, a, steps, noise);
}

/// Plain J for one rollout.
inline double objective(const sim::SystemModel& m, const stl::RequirementSet& reqs, std::span<const double> s0,
                        const policy::Policy& attacker, const policy::Policy& defender, std::size_t horizon,
                        sim::NoiseSource& noise) {
  const auto rec = sim::rollout<double>(m, s0, agent_policy(defender), env_policy(attacker), horizon, noise);
  return windowed_objective(reqs, rec.monitored, horizon);
}

struct Gradient {
  double value = 0.0;
  std::vector<double> attacker;
  std::vector<double> defender;
};

/// J on a tape and its gradient with respect to both parameter vectors.
inline Gradient objective_gradient(const sim::SystemModel& m, const stl::RequirementSet& reqs,
                                   std::span<const double> s0, const policy::Policy& attacker,
                                   const policy::Policy& defender, std::size_t horizon, sim::NoiseSource& noise,
                                   ad::Tape& tape) {
  tape.clear();
  const auto ta = tape.lift(attacker.params);
  const auto td = tape.lift(defender.params);
  const auto rec = rollout_on_tape(tape, m, s0, attacker.net, ta, defender.net, td, horizon, noise);
  const ad::Var j = windowed_objective(reqs, rec.monitored, horizon);
  tape.backward(j);
  return Gradient{j.value(), tape.gradient(ta), tape.gradient(td)};
}

inline Gradient objective_gradient(const sim::SystemModel& m, const stl::RequirementSet& reqs,
                                   std::span<const double> s0, const policy::Policy& attacker,
                                   const policy::Policy& defender, std::size_t horizon, sim::NoiseSource& noise) {
  ad::Tape tape;
  return objective_gradient(m, reqs, s0, attacker, defender, horizon, noise, tape);
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  std::size_t horizon = 40;
  std::size_t window = 10;
  std::size_t iterations = 500;
  std::size_t attacker_steps = 1;
  std::size_t defender_steps = 2;
  optim::AdamParams attacker_opt;
  optim::AdamParams defender_opt;
  double grad_clip = 10.0;
  std::size_t max_retries = 20;
  InitialStateSampler sampler;
  std::uint64_t seed = 0;

  void validate() const {
    if (window == 0) throw std::invalid_argument("window must be positive");
    if (horizon < window) throw std::invalid_argument("horizon must be at least the window");
    if (!(grad_clip >= 0)) throw std::invalid_argument("gradient clip must be non-negative");
    optim::Adam(0, attacker_opt);
    optim::Adam(0, defender_opt);
  }
};

/// Training stopped on a non-finite value or after exhausting divergence retries.
class NumericAbort : public std::runtime_error {
 public:
  NumericAbort(std::size_t iteration, const std::string& what)
      : std::runtime_error("iteration " + std::to_string(iteration) + ": " + what), iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

enum class Phase : std::uint8_t { attacker, defender };
inline const char* to_string(Phase p) { return p == Phase::attacker ? "attacker" : "defender"; }

struct HistoryRow {
  std::size_t iteration = 0;
  Phase phase = Phase::attacker;
  std::size_t update = 0;  // index within the phase
  double objective = 0.0;
  double grad_norm = 0.0;  // before clipping
};

struct TrainResult {
  policy::Policy attacker;
  policy::Policy defender;
  std::vector<HistoryRow> history;
  std::size_t resampled = 0;  // initial states dropped after a divergent rollout
};

/// Networks with their initialization drawn from seed-derived streams.
inline std::pair<policy::Policy, policy::Policy> initial_policies(const policy::MlpSpec& attacker,
                                                                  const policy::MlpSpec& defender,
                                                                  std::uint64_t seed) {
  std::mt19937_64 ra(derive_seed(seed, "init-attacker"));
  std::mt19937_64 rd(derive_seed(seed, "init-defender"));
  policy::Mlp a(attacker), d(defender);
  auto pa = policy::init_params(ra, attacker);
  auto pd = policy::init_params(rd, defender);
  return {policy::Policy(std::move(a), std::move(pa)), policy::Policy(std::move(d), std::move(pd))};
}

/// Checks that the network shapes fit the model.
inline void check_architecture(const sim::SystemModel& m, const policy::Policy& attacker,
                               const policy::Policy& defender) {
  if (attacker.net.inputs() != m.env_obs_dim() + m.noise_dim())
    throw std::invalid_argument("attacker expects " + std::to_string(attacker.net.inputs()) +
                                " inputs, model provides " + std::to_string(m.env_obs_dim() + m.noise_dim()));
  if (attacker.net.outputs() != m.env_actions().dim())
    throw std::invalid_argument("attacker output width does not match the environment action space");
  if (defender.net.inputs() != m.agent_obs_dim())
    throw std::invalid_argument("defender expects " + std::to_string(defender.net.inputs()) +
                                " inputs, model provides " + std::to_string(m.agent_obs_dim()));
  if (defender.net.outputs() != m.agent_actions().dim())
    throw std::invalid_argument("defender output width does not match the agent action space");
}

using HistoryCallback = std::function<void(const HistoryRow&)>;

inline TrainResult train(const sim::SystemModel& m, const stl::RequirementSet& reqs, const TrainConfig& cfg,
                         policy::Policy attacker, policy::Policy defender, const HistoryCallback& on_update = {}) {
  cfg.validate();
  cfg.sampler.check(m);
  check_architecture(m, attacker, defender);
  if (reqs.window() != cfg.window) throw std::invalid_argument("requirement window differs from the config window");

  std::mt19937_64 state_rng(derive_seed(cfg.seed, "train-initial-state"));
  std::mt19937_64 noise_rng(derive_seed(cfg.seed, "train-noise"));
  optim::Adam opt_a(attacker.params.size(), cfg.attacker_opt);
  optim::Adam opt_d(defender.params.size(), cfg.defender_opt);

  TrainResult result;
  ad::Tape tape;

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    std::vector<double> s0 = cfg.sampler.sample(m, state_rng);

    auto update = [&](Phase phase, std::size_t k) {
      Gradient g;
      for (std::size_t attempt = 0;; ++attempt) {
        sim::GaussianNoise noise(noise_rng());
        try {
          g = objective_gradient(m, reqs, s0, attacker, defender, cfg.horizon, noise, tape);
          break;
        } catch (const sim::DivergenceError& e) {
          ++result.resampled;
          if (attempt >= cfg.max_retries) throw NumericAbort(it, std::string("rollouts keep diverging: ") + e.what());
          s0 = cfg.sampler.sample(m, state_rng);
        }
      }
      auto& grad = phase == Phase::attacker ? g.attacker : g.defender;
      if (!std::isfinite(g.value)) throw NumericAbort(it, "objective is not finite");
      for (double x : grad)
        if (!std::isfinite(x)) throw NumericAbort(it, std::string("non-finite ") + to_string(phase) + " gradient");
      const double norm = optim::clip_by_norm(grad, cfg.grad_clip);
      if (phase == Phase::attacker) opt_a.step(attacker.params, grad, -1.0);
      else opt_d.step(defender.params, grad, +1.0);
      result.history.push_back(HistoryRow{it, phase, k, g.value, norm});
      if (on_update) on_update(result.history.back());
    };

    for (std::size_t k = 0; k < cfg.attacker_steps; ++k) update(Phase::attacker, k);
    for (std::size_t k = 0; k < cfg.defender_steps; ++k) update(Phase::defender, k);
  }

  result.attacker = std::move(attacker);
  result.defender = std::move(defender);
  return result;
}

// ---------------------------------------------------------------------------
// Testing

/// Robustness of G[0, L-1-depth] phi_i at t = 0 for every requirement, on the
/// whole monitored trajectory (window-relative components re-based at 0).
inline std::vector<double> global_robustness(const stl::RequirementSet& reqs,
                                             const stl::Trajectory<double>& monitored) {
  const auto xi = monitored.window(0, monitored.length(), reqs.window_relative());
  std::vector<double> out;
  out.reserve(reqs.size());
  for (const auto& r : reqs.items()) {
    const std::size_t depth = stl::temporal_depth(r.formula);
    if (depth + 1 > xi.length()) throw std::invalid_argument("test trajectory shorter than requirement '" + r.name + "'");
    out.push_back(stl::robustness(stl::globally(0, xi.length() - 1 - depth, r.formula), xi, 0));
  }
  return out;
}

struct TestRow {
  std::size_t index = 0;
  std::vector<double> initial_state;
  std::vector<double> robustness;  // per requirement, empty when the rollout failed
  std::string error;
  std::uint64_t pairing_hash = 0;  // of the initial state and the noise sequence
  std::optional<std::size_t> limit_exit;

  bool ok() const { return error.empty(); }
  bool satisfied(std::size_t i) const { return ok() && robustness.at(i) > 0.0; }
};

inline std::uint64_t pairing_hash(std::span<const double> s0, const std::vector<std::vector<double>>& noise) {
  std::uint64_t h = fnv1a_bytes(s0.data(), s0.size() * sizeof(double));
  for (const auto& z : noise) h = fnv1a_bytes(z.data(), z.size() * sizeof(double), h);
  return h;
}

/// One rollout of `horizon` steps and the global robustness of each requirement.
inline TestRow test(const sim::SystemModel& m, const stl::RequirementSet& reqs,
                    const sim::AgentPolicy<double>& defender, const sim::EnvPolicy<double>& attacker,
                    std::span<const double> s0, std::size_t horizon, sim::NoiseSource& noise) {
  if (horizon < 1) throw std::invalid_argument("test horizon must be at least 1");
  TestRow row;
  row.initial_state.assign(s0.begin(), s0.end());
  const auto rec = sim::rollout<double>(m, s0, defender, attacker, horizon, noise);
  row.robustness = global_robustness(reqs, rec.monitored);
  row.pairing_hash = pairing_hash(s0, rec.noise);
  row.limit_exit = rec.first_limit_exit;
  return row;
}

struct TestSummary {
  std::vector<std::string> requirements;
  std::size_t n = 0;
  std::size_t failures = 0;
  std::vector<double> fraction_positive;
  std::vector<double> min_robustness;
  std::vector<double> mean_robustness;
};

struct TestReport {
  std::vector<std::string> requirements;
  std::vector<TestRow> rows;

  TestSummary summary() const {
    TestSummary s;
    s.requirements = requirements;
    s.n = rows.size();
    const std::size_t k = requirements.size();
    s.fraction_positive.assign(k, 0.0);
    s.min_robustness.assign(k, std::numeric_limits<double>::infinity());
    s.mean_robustness.assign(k, 0.0);
    std::size_t ok = 0;
    for (const auto& r : rows) {
      if (!r.ok()) {
        ++s.failures;
        continue;
      }
      ++ok;
      for (std::size_t i = 0; i < k; ++i) {
        if (r.satisfied(i)) s.fraction_positive[i] += 1.0;
        s.min_robustness[i] = std::min(s.min_robustness[i], r.robustness[i]);
        s.mean_robustness[i] += r.robustness[i];
      }
    }
    for (std::size_t i = 0; i < k; ++i) {
      s.fraction_positive[i] = s.n == 0 ? 0.0 : s.fraction_positive[i] / static_cast<double>(s.n);
      s.mean_robustness[i] = ok == 0 ? std::numeric_limits<double>::quiet_NaN() : s.mean_robustness[i] / ok;
      if (ok == 0) s.min_robustness[i] = std::numeric_limits<double>::quiet_NaN();
    }
    return s;
  }
};

/// Per-trajectory controller factories; stateful controllers get a fresh
/// instance for every rollout.
struct Controllers {
  std::function<sim::AgentPolicy<double>()> defender;
  std::function<sim::EnvPolicy<double>()> attacker;
};

inline Controllers policy_controllers(const policy::Policy& attacker, const policy::Policy& defender) {
  return Controllers{[&defender] { return agent_policy(defender); }, [&attacker] { return env_policy(attacker); }};
}

/// Runs body(i) for i in [0, n) on up to `threads` workers.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          body(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// n independent rollouts from sampled initial states. Sample i draws its
/// initial state and noise from streams derived from (seed, i), so rows do not
/// depend on scheduling. Rollout failures are recorded in the row.
inline TestReport evaluate_testset(const sim::SystemModel& m, const stl::RequirementSet& reqs,
                                   const Controllers& controllers, const InitialStateSampler& sampler, std::size_t n,
                                   std::size_t horizon, std::uint64_t seed, unsigned threads = 0) {
  sampler.check(m);
  TestReport report;
  for (const auto& r : reqs.items()) report.requirements.push_back(r.name);
  report.rows.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(seed, "test-initial-state", i));
    const auto s0 = sampler.sample(m, rng);
    sim::GaussianNoise noise(derive_seed(seed, "test-noise", i));
    TestRow row;
    try {
      row = test(m, reqs, controllers.defender(), controllers.attacker(), s0, horizon, noise);
    } catch (const std::exception& e) {
      row.initial_state = s0;
      row.error = e.what();
    }
    row.index = i;
    report.rows[i] = std::move(row);
  });
  return report;
}

struct CompareRow {
  std::size_t index = 0;
  std::vector<double> initial_state;
  TestRow first;
  TestRow second;
  /// first - second per requirement; empty when either arm failed.
  std::vector<double> difference;
};

/// Paired evaluation: both arms see the same initial states and noise streams.
inline std::vector<CompareRow> compare(const sim::SystemModel& m, const stl::RequirementSet& reqs,
                                       const Controllers& first, const Controllers& second,
                                       const InitialStateSampler& sampler, std::size_t n, std::size_t horizon,
                                       std::uint64_t seed, unsigned threads = 0) {
  const auto a = evaluate_testset(m, reqs, first, sampler, n, horizon, seed, threads);
  const auto b = evaluate_testset(m, reqs, second, sampler, n, horizon, seed, threads);
  std::vector<CompareRow> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& row = out[i];
    row.index = i;
    row.initial_state = a.rows[i].initial_state;
    row.first = a.rows[i];
    row.second = b.rows[i];
    if (row.first.ok() && row.second.ok())
      for (std::size_t k = 0; k < reqs.size(); ++k)
        row.difference.push_back(row.first.robustness[k] - row.second.robustness[k]);
  }
  return out;
}

}  // namespace advstl::train
