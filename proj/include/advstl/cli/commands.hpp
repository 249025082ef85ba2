#pragma once

/*!
  \file commands.hpp
  \brief The train / test / rollout / compare verbs behind the advstl tool.

  Every command returns a process exit code: 0 on success, 2 for usage,
  configuration or input errors, 3 when training aborts numerically (or when
  every test trajectory fails).
*/

#include <advstl/io/config.hpp>
#include <advstl/io/csv.hpp>
#include <advstl/io/weights.hpp>
#include <advstl/systems/baselines.hpp>
#include <advstl/train.hpp>

#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace advstl::cli {

enum ExitCode : int { exit_ok = 0, exit_usage = 2, exit_numeric = 3 };

/// Raised for bad command-line input; mapped to exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct CommonOptions {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct TrainOptions : CommonOptions {};

struct WeightOptions : CommonOptions {
  std::string attacker_path;  // default: <output_dir>/attacker.json
  std::string defender_path;  // default: <output_dir>/defender.json
};

struct TestOptions : WeightOptions {
  std::optional<std::size_t> n;
  std::optional<std::size_t> horizon;
  std::optional<std::string> mode;
  std::string actions_path;  // fixed-env mode
  std::optional<unsigned> threads;
};

struct RolloutOptions : WeightOptions {
  std::vector<double> s0;  // initial variables of the system
  bool sample = false;
  std::optional<std::size_t> horizon;
  std::string actions_path;  // replay these environment actions instead of the attacker
};

struct CompareOptions : TestOptions {
  std::string baseline;  // pid | smc
};

// ---------------------------------------------------------------------------
// Shared helpers

/// Log verbosity from ADVSTL_LOG (quiet, info, debug); default info.
inline int log_level() {
  const char* v = std::getenv("ADVSTL_LOG");
  if (!v) return 1;
  const std::string s(v);
  if (s == "quiet") return 0;
  if (s == "debug") return 2;
  return 1;
}

inline io::ExperimentConfig resolve_config(const CommonOptions& o) {
  if (!o.config_path.empty() && !o.preset.empty()) throw UsageError("give either --config or --preset, not both");
  io::ExperimentConfig c;
  if (!o.config_path.empty()) c = io::load_config(o.config_path);
  else if (!o.preset.empty()) c = io::preset(o.preset);
  else throw UsageError("a --config file or a --preset is required");
  if (o.seed) c.seed = *o.seed;
  if (!o.out.empty()) c.output_dir = o.out;
  return c;
}

inline std::filesystem::path ensure_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw UsageError("cannot create output directory '" + dir + "': " + ec.message());
  return p;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + p.string() + "'");
  return out;
}

struct LoadedPolicies {
  policy::Policy attacker;
  policy::Policy defender;
};

inline LoadedPolicies load_policies(const WeightOptions& o, const io::ExperimentConfig& c, const io::Experiment& e,
                                    bool need_attacker = true) {
  const std::filesystem::path dir(c.output_dir);
  const std::string hash = io::hash_hex(io::config_hash(c));
  LoadedPolicies p;
  const auto dpath = o.defender_path.empty() ? (dir / "defender.json").string() : o.defender_path;
  p.defender = io::checked_policy(io::load_weights(dpath), "defender", e.defender, hash);
  if (need_attacker) {
    const auto apath = o.attacker_path.empty() ? (dir / "attacker.json").string() : o.attacker_path;
    p.attacker = io::checked_policy(io::load_weights(apath), "attacker", e.attacker, hash);
  }
  return p;
}

/// Environment action sequence from a CSV whose columns include the model's
/// environment action names (a rollout CSV qualifies).
inline std::vector<std::vector<double>> load_env_actions(const std::string& path, const sim::SystemModel& m,
                                                         std::size_t steps) {
  const auto t = io::read_csv_file(path);
  std::vector<std::size_t> cols;
  for (const auto& name : m.env_actions().names) {
    try {
      cols.push_back(t.column(name));
    } catch (const std::invalid_argument&) {
      throw UsageError("action file '" + path + "' has no column '" + name + "'");
    }
  }
  if (t.rows.size() < steps)
    throw UsageError("action file '" + path + "' has " + std::to_string(t.rows.size()) + " rows, " +
                     std::to_string(steps) + " steps requested");
  std::vector<std::vector<double>> out;
  for (std::size_t j = 0; j < steps; ++j) {
    std::vector<double> u;
    for (auto c : cols) u.push_back(io::parse_double(t.rows[j][c]));
    out.push_back(std::move(u));
  }
  return out;
}

/// Attacker side of a test: the trained network or a replayed sequence.
inline std::function<sim::EnvPolicy<double>()> env_controller(const io::ExperimentConfig& c, const io::Experiment& e,
                                                              const policy::Policy* attacker,
                                                              const std::string& actions_path, std::size_t steps) {
  if (c.test.mode == io::TestMode::fixed_env) {
    if (actions_path.empty()) throw UsageError("fixed-env mode needs --actions");
    auto actions = std::make_shared<const std::vector<std::vector<double>>>(load_env_actions(actions_path, *e.model, steps));
    return [actions] { return sim::replay_env<double>(*actions); };
  }
  if (!actions_path.empty()) throw UsageError("--actions applies only to fixed-env mode");
  return [attacker] { return train::env_policy(*attacker); };
}

/// Classical controller for the configured system: "pid" for platoons, "smc" for the cart-pole.
inline std::function<sim::AgentPolicy<double>()> baseline_controller(const io::ExperimentConfig& c,
                                                                     const io::Experiment& e,
                                                                     const std::string& name) {
  if (name == "smc") {
    if (c.system != io::SystemKind::cartpole) throw UsageError("the smc baseline applies to the cartpole system");
    const systems::SlidingModeBalancer smc(c.smc);
    return [smc] {
      return sim::AgentPolicy<double>(
          [smc](std::span<const double> o, std::size_t) { return std::vector<double>{smc.act(o)}; });
    };
  }
  if (name == "pid") {
    if (c.system == io::SystemKind::cartpole) throw UsageError("the pid baseline applies to platoon systems");
    const auto gains = c.pid;
    const double dt = e.model->dt();
    const std::size_t replicas = e.model->agent_replicas();
    std::shared_ptr<const sim::SystemModel> model = e.model;
    const bool energy = c.system == io::SystemKind::platoon_energy;
    return [=] {
      auto pids = std::make_shared<std::vector<systems::PidFollower>>(replicas, systems::PidFollower(gains, dt));
      return sim::AgentPolicy<double>([pids, model, energy](std::span<const double> o, std::size_t r) {
        const double a = pids->at(r).act(o);
        if (!energy) return std::vector<double>{a};
        return systems::torques_for_acceleration(static_cast<const systems::PlatoonEnergy&>(*model), a, o[1]);
      });
    };
  }
  throw UsageError("unknown baseline '" + name + "' (pid, smc)");
}

// ---------------------------------------------------------------------------
// Report writers

inline void write_history(std::ostream& out, const std::vector<train::HistoryRow>& h) {
  io::CsvWriter w(out);
  w.header({"iteration", "phase", "update", "objective", "grad_norm"});
  for (const auto& r : h) w.cell(r.iteration).cell(train::to_string(r.phase)).cell(r.update).cell(r.objective).cell(r.grad_norm).end();
}

inline void write_report(std::ostream& out, const train::TestReport& rep, const sim::SystemModel& m) {
  io::CsvWriter w(out);
  std::vector<std::string> cols{"index"};
  for (auto& s : m.state_names()) cols.push_back("s0_" + s);
  for (auto& r : rep.requirements) cols.push_back("rho_" + r);
  for (auto& r : rep.requirements) cols.push_back("sat_" + r);
  for (auto c : {"limit_exit", "pairing_hash", "error"}) cols.push_back(c);
  w.header(cols);
  for (const auto& row : rep.rows) {
    w.cell(row.index);
    for (double v : row.initial_state) w.cell(v);
    for (std::size_t i = 0; i < rep.requirements.size(); ++i) row.ok() ? w.cell(row.robustness[i]) : w.empty();
    for (std::size_t i = 0; i < rep.requirements.size(); ++i) w.cell(row.ok() && row.satisfied(i));
    row.limit_exit ? w.cell(*row.limit_exit) : w.empty();
    w.cell(io::hash_hex(row.pairing_hash));
    w.cell(row.error);
    w.end();
  }
}

inline nlohmann::json summary_json(const train::TestSummary& s) {
  nlohmann::json reqs = nlohmann::json::object();
  for (std::size_t i = 0; i < s.requirements.size(); ++i)
    reqs[s.requirements[i]] = {{"fraction_positive", s.fraction_positive[i]},
                               {"min_robustness", s.min_robustness[i]},
                               {"mean_robustness", s.mean_robustness[i]}};
  return {{"n", s.n}, {"failures", s.failures}, {"requirements", reqs}};
}

// ---------------------------------------------------------------------------
// Commands

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const train::NumericAbort& e) {
    err << "error: training aborted: " << e.what() << '\n';
    return exit_numeric;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const io::ConfigError& e) {
    err << "error: invalid config: " << e.what() << '\n';
    return exit_usage;
  } catch (const io::WeightError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_numeric;
  }
}

inline int cmd_train(const TrainOptions& o, std::ostream& log = std::cerr, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const auto c = resolve_config(o);
    const auto e = io::build(c);
    const auto dir = ensure_dir(c.output_dir);
    const std::string hash = io::hash_hex(io::config_hash(c));
    auto [a0, d0] = train::initial_policies(e.attacker, e.defender, c.seed);

    const bool verbose = log_level() >= 2;
    const std::size_t every = std::max<std::size_t>(1, c.train.iterations / 10);
    auto progress = [&](const train::HistoryRow& r) {
      if (verbose || (log_level() >= 1 && r.phase == train::Phase::defender && r.update + 1 == c.train.defender_steps &&
                      (r.iteration + 1) % every == 0))
        log << "iteration " << r.iteration + 1 << "/" << c.train.iterations << " " << train::to_string(r.phase)
            << " J=" << io::format_double(r.objective) << " |g|=" << io::format_double(r.grad_norm) << '\n';
    };
    const auto result = train::train(*e.model, *e.requirements, e.train, std::move(a0), std::move(d0), progress);

    const auto stamp = io::reproducible_timestamp();
    io::save_weights((dir / "attacker.json").string(),
                     io::WeightFile{"attacker", e.attacker, result.attacker.params, hash, stamp});
    io::save_weights((dir / "defender.json").string(),
                     io::WeightFile{"defender", e.defender, result.defender.params, hash, stamp});
    {
      auto out = open_out(dir / "history.csv");
      write_history(out, result.history);
    }
    {
      auto out = open_out(dir / "config.resolved.json");
      auto j = io::to_json(c);
      j.erase("output_dir");  // identical bytes wherever the run is written
      out << j.dump(2) << '\n';
    }
    if (log_level() >= 1)
      log << "wrote " << (dir / "attacker.json").string() << ", " << (dir / "defender.json").string() << " ("
          << result.resampled << " divergent rollouts resampled)\n";
    return exit_ok;
  });
}

inline int cmd_test(const TestOptions& o, std::ostream& log = std::cerr, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    auto c = resolve_config(o);
    if (o.n) c.test.n = *o.n;
    if (o.horizon) c.test.horizon = *o.horizon;
    if (o.mode) c.test.mode = io::parse_test_mode(*o.mode);
    if (o.threads) c.test.threads = *o.threads;
    if (c.test.n < 1) throw UsageError("--n must be at least 1");
    if (c.test.horizon < 1) throw UsageError("--horizon must be at least 1");
    const auto e = io::build(c);
    const bool fixed = c.test.mode == io::TestMode::fixed_env;
    const auto p = load_policies(o, c, e, !fixed);

    train::Controllers ctl;
    ctl.defender = [&p] { return train::agent_policy(p.defender); };
    ctl.attacker = env_controller(c, e, &p.attacker, o.actions_path, c.test.horizon);
    const auto rep = train::evaluate_testset(*e.model, *e.requirements, ctl, e.train.sampler, c.test.n,
                                             c.test.horizon, c.seed, c.test.threads);
    const auto s = rep.summary();

    const auto dir = ensure_dir(c.output_dir);
    {
      auto out = open_out(dir / "report.csv");
      write_report(out, rep, *e.model);
    }
    {
      auto j = summary_json(s);
      j["mode"] = io::to_string(c.test.mode);
      j["horizon"] = c.test.horizon;
      j["seed"] = c.seed;
      j["config_hash"] = io::hash_hex(io::config_hash(c));
      auto out = open_out(dir / "summary.json");
      out << j.dump(2) << '\n';
    }
    if (log_level() >= 1) {
      for (std::size_t i = 0; i < s.requirements.size(); ++i)
        log << s.requirements[i] << ": " << io::format_double(100.0 * s.fraction_positive[i])
            << "% positive, min " << io::format_double(s.min_robustness[i]) << ", mean "
            << io::format_double(s.mean_robustness[i]) << '\n';
      if (s.failures) log << s.failures << " of " << s.n << " trajectories failed\n";
    }
    return s.failures == s.n ? exit_numeric : exit_ok;
  });
}

inline int cmd_rollout(const RolloutOptions& o, std::ostream& log = std::cerr, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    auto out_file = o.out;
    CommonOptions common = o;
    common.out.clear();  // --out names the CSV file here
    auto c = resolve_config(common);
    const std::size_t steps = o.horizon.value_or(c.test.horizon);
    if (steps < 1) throw UsageError("--horizon must be at least 1");
    const auto e = io::build(c);
    const auto& m = *e.model;
    const bool replay = !o.actions_path.empty();
    const auto p = load_policies(o, c, e, !replay);

    std::vector<double> s0;
    if (o.sample == !o.s0.empty()) throw UsageError("give exactly one of --s0 or --sample");
    if (o.sample) {
      std::mt19937_64 rng(derive_seed(c.seed, "rollout-initial-state"));
      s0 = e.train.sampler.sample(m, rng);
    } else {
      const auto vars = m.initial_variables();
      if (o.s0.size() != vars.size()) {
        std::string names;
        for (auto& v : vars) names += (names.empty() ? "" : ",") + v;
        throw UsageError("--s0 needs " + std::to_string(vars.size()) + " values (" + names + "), got " +
                         std::to_string(o.s0.size()));
      }
      s0 = m.make_initial_state(o.s0);
    }

    sim::EnvPolicy<double> env = replay ? sim::replay_env<double>(load_env_actions(o.actions_path, m, steps))
                                        : train::env_policy(p.attacker);
    sim::GaussianNoise noise(derive_seed(c.seed, "rollout-noise"));
    const auto rec = sim::rollout<double>(m, s0, train::agent_policy(p.defender), env, steps, noise);

    const auto& reqs = *e.requirements;
    const std::size_t h = reqs.window();
    std::vector<std::string> cols{"step", "time"};
    for (auto& s : m.state_names()) cols.push_back(s);
    const std::size_t replicas = m.agent_replicas();
    for (std::size_t r = 0; r < replicas; ++r)
      for (auto& a : m.agent_actions().names) cols.push_back(replicas == 1 ? a : a + "_" + std::to_string(r + 1));
    for (auto& a : m.env_actions().names) cols.push_back(a);
    for (auto& r : reqs.items()) cols.push_back("rho_" + r.name);

    if (out_file.empty()) out_file = (ensure_dir(c.output_dir) / "rollout.csv").string();
    else if (auto parent = std::filesystem::path(out_file).parent_path(); !parent.empty()) ensure_dir(parent.string());
    auto out = open_out(out_file);
    io::CsvWriter w(out);
    w.header(cols);
    for (std::size_t j = 0; j < steps; ++j) {
      w.cell(j).cell(static_cast<double>(j) * m.dt());
      for (double v : rec.states.state(j)) w.cell(v);
      for (double v : rec.actions_a[j]) w.cell(v);
      for (double v : rec.actions_e[j]) w.cell(v);
      if (j + h <= rec.monitored.length()) {
        const auto win = rec.monitored.window(j, h, reqs.window_relative());
        for (const auto& r : reqs.items()) w.cell(stl::robustness(r.formula, win, 0));
      } else {
        for (std::size_t i = 0; i < reqs.size(); ++i) w.empty();
      }
      w.end();
    }
    if (log_level() >= 1) log << "wrote " << out_file << " (" << steps << " steps)\n";
    return exit_ok;
  });
}

inline int cmd_compare(const CompareOptions& o, std::ostream& log = std::cerr, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    auto c = resolve_config(o);
    if (o.n) c.test.n = *o.n;
    if (o.horizon) c.test.horizon = *o.horizon;
    if (o.mode) c.test.mode = io::parse_test_mode(*o.mode);
    if (o.threads) c.test.threads = *o.threads;
    if (c.test.n < 1) throw UsageError("--n must be at least 1");
    const auto e = io::build(c);
    const std::string baseline = o.baseline.empty() ? (c.system == io::SystemKind::cartpole ? "smc" : "pid") : o.baseline;
    auto base = baseline_controller(c, e, baseline);
    const bool fixed = c.test.mode == io::TestMode::fixed_env;
    const auto p = load_policies(o, c, e, !fixed);

    const auto env = env_controller(c, e, &p.attacker, o.actions_path, c.test.horizon);
    train::Controllers learned{[&p] { return train::agent_policy(p.defender); }, env};
    train::Controllers classic{base, env};
    const auto rows = train::compare(*e.model, *e.requirements, learned, classic, e.train.sampler, c.test.n,
                                     c.test.horizon, c.seed, c.test.threads);

    std::vector<std::string> req_names;
    for (auto& r : e.requirements->items()) req_names.push_back(r.name);
    const auto dir = ensure_dir(c.output_dir);
    {
      auto out = open_out(dir / "compare.csv");
      io::CsvWriter w(out);
      std::vector<std::string> cols{"index"};
      for (auto& s : e.model->state_names()) cols.push_back("s0_" + s);
      for (auto& r : req_names) {
        cols.push_back("rho_defender_" + r);
        cols.push_back("rho_" + baseline + "_" + r);
        cols.push_back("diff_" + r);
      }
      for (auto col : {"hash_defender", "hash_baseline", "error"}) cols.push_back(col);
      w.header(cols);
      for (const auto& row : rows) {
        w.cell(row.index);
        for (double v : row.initial_state) w.cell(v);
        for (std::size_t i = 0; i < req_names.size(); ++i) {
          row.first.ok() ? w.cell(row.first.robustness[i]) : w.empty();
          row.second.ok() ? w.cell(row.second.robustness[i]) : w.empty();
          row.difference.empty() ? w.empty() : w.cell(row.difference[i]);
        }
        w.cell(io::hash_hex(row.first.pairing_hash)).cell(io::hash_hex(row.second.pairing_hash));
        w.cell(row.first.error.empty() ? row.second.error : row.first.error);
        w.end();
      }
    }
    train::TestReport a, b;
    a.requirements = b.requirements = req_names;
    for (const auto& row : rows) {
      a.rows.push_back(row.first);
      b.rows.push_back(row.second);
    }
    const auto sa = a.summary(), sb = b.summary();
    {
      nlohmann::json j{{"defender", summary_json(sa)}, {"baseline", summary_json(sb)}, {"baseline_name", baseline},
                       {"mode", io::to_string(c.test.mode)}, {"horizon", c.test.horizon}, {"seed", c.seed}};
      auto out = open_out(dir / "compare_summary.json");
      out << j.dump(2) << '\n';
    }
    if (log_level() >= 1)
      for (std::size_t i = 0; i < req_names.size(); ++i)
        log << req_names[i] << ": defender " << io::format_double(100.0 * sa.fraction_positive[i]) << "% positive, "
            << baseline << " " << io::format_double(100.0 * sb.fraction_positive[i]) << "% positive\n";
    return exit_ok;
  });
}

}  // namespace advstl::cli
