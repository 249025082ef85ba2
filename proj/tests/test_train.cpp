#include <advstl/io/config.hpp>
#include <advstl/optim.hpp>
#include <advstl/train.hpp>

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <random>

using namespace advstl;

namespace {

io::Experiment experiment(io::ExperimentConfig c) { return io::build(c); }

io::ExperimentConfig small_cartpole(std::size_t iterations = 5) {
  auto c = io::cartpole_defaults();
  c.train.iterations = iterations;
  c.train.horizon = 15;
  c.train.window = 5;
  return c;
}

sim::AgentPolicy<double> const_agent(std::vector<double> u) {
  return [u](std::span<const double>, std::size_t) { return u; };
}
sim::EnvPolicy<double> const_env(std::vector<double> u) {
  return [u](std::span<const double>, std::span<const double>, std::size_t) { return u; };
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

}  // namespace

// ---------------------------------------------------------------------------
// Objective

TEST(Objective, SingleWindowWhenHorizonEqualsWindow) {
  auto c = io::cartpole_defaults();
  c.train.horizon = c.train.window = 8;
  const auto e = experiment(c);
  auto [a, d] = train::initial_policies(e.attacker, e.defender, 3);
  const std::vector<double> s0{0.1, 0.0, 0.02, 0.0, 0.1};
  sim::GaussianNoise n1(5), n2(5);
  const double j = train::objective(*e.model, *e.requirements, s0, a, d, 8, n1);
  const auto rec = sim::rollout<double>(*e.model, s0, train::agent_policy(d), train::env_policy(a), 8, n2);
  EXPECT_EQ(j, stl::combined_robustness(*e.requirements, rec.monitored.window(0, 8), 0));
}

TEST(Objective, ConstantTrajectorySumsEqualWindows) {
  systems::CartPole m;
  const auto reqs = systems::cartpole_requirements(m.params(), 4);
  std::vector<double> data;
  const std::vector<double> s{0.25, 0.0, 0.1, 0.0, 0.0};
  for (int j = 0; j < 21; ++j) {
    const auto mon = m.monitored(s);
    data.insert(data.end(), mon.begin(), mon.end());
  }
  const stl::Trajectory<double> xi(data, 6, 0.05);
  const double r = stl::combined_robustness(reqs, xi.window(0, 4), 0);
  EXPECT_DOUBLE_EQ(train::windowed_objective(reqs, xi, 20), (20 - 4 + 1) * r);
}

TEST(Objective, RejectsShortHorizon) {
  systems::CartPole m;
  const auto reqs = systems::cartpole_requirements(m.params(), 10);
  const stl::Trajectory<double> xi(std::vector<double>(6 * 20, 0.0), 6, 0.05);
  EXPECT_THROW(train::windowed_objective(reqs, xi, 5), std::invalid_argument);
  EXPECT_THROW(train::windowed_objective(reqs, xi, 25), std::invalid_argument);
}

TEST(Objective, TapedValueEqualsPlain) {
  std::mt19937_64 rng(31);
  for (auto kind : {io::SystemKind::cartpole, io::SystemKind::platoon_basic, io::SystemKind::platoon_energy}) {
    auto c = io::system_defaults(kind);
    const auto e = experiment(c);
    for (int k = 0; k < 5; ++k) {
      auto [a, d] = train::initial_policies(e.attacker, e.defender, rng());
      const auto s0 = e.train.sampler.sample(*e.model, rng);
      sim::GaussianNoise n1(k), n2(k);
      const double plain = train::objective(*e.model, *e.requirements, s0, a, d, 40, n1);
      const auto g = train::objective_gradient(*e.model, *e.requirements, s0, a, d, 40, n2);
      EXPECT_TRUE(same_bits(plain, g.value));
      EXPECT_EQ(g.attacker.size(), a.params.size());
      EXPECT_EQ(g.defender.size(), d.params.size());
    }
  }
}

TEST(Objective, DefenderAscentIncreasesObjective) {
  // Small steps along the gradient raise J on a frozen sample and frozen noise.
  const auto e = experiment(io::cartpole_defaults());
  auto [a, d] = train::initial_policies(e.attacker, e.defender, 11);
  const std::vector<double> s0{0.2, -0.1, 0.03, 0.1, 0.2};
  sim::GaussianNoise n0(9);
  const auto g = train::objective_gradient(*e.model, *e.requirements, s0, a, d, 40, n0);
  const double sq = std::inner_product(g.defender.begin(), g.defender.end(), g.defender.begin(), 0.0);
  ASSERT_GT(sq, 0.0);
  for (double eta : {1e-5, 1e-6}) {
    auto moved = d;
    for (std::size_t i = 0; i < moved.params.size(); ++i) moved.params[i] += eta * g.defender[i];
    sim::GaussianNoise n1(9);
    const double j1 = train::objective(*e.model, *e.requirements, s0, a, moved, 40, n1);
    EXPECT_GT(j1, g.value) << "eta " << eta;
  }
  // One Adam step in the ascent direction also raises J.
  optim::Adam opt(d.params.size(), {1e-5});
  auto stepped = d;
  opt.step(stepped.params, g.defender, +1.0);
  sim::GaussianNoise n2(9);
  EXPECT_GT(train::objective(*e.model, *e.requirements, s0, a, stepped, 40, n2), g.value);
}

// ---------------------------------------------------------------------------
// Optimizer

TEST(Adam, FirstStepMovesByLearningRate) {
  optim::Adam opt(2, {0.1});
  std::vector<double> p{1.0, 1.0};
  const std::vector<double> g{3.0, -0.5};
  opt.step(p, g, -1.0);
  EXPECT_NEAR(p[0], 0.9, 1e-8);
  EXPECT_NEAR(p[1], 1.1, 1e-8);
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(Adam, Validation) {
  EXPECT_THROW(optim::Adam(1, {-1.0}), std::invalid_argument);
  EXPECT_THROW(optim::Adam(1, {1e-3, 1.0}), std::invalid_argument);
  optim::Adam opt(2, {});
  std::vector<double> p(3);
  EXPECT_THROW(opt.step(p, p, 1.0), std::invalid_argument);
}

TEST(ClipByNorm, RescalesLongGradients) {
  std::vector<double> g{3.0, 4.0};
  EXPECT_EQ(optim::clip_by_norm(g, 10.0), 5.0);
  EXPECT_EQ(g, (std::vector<double>{3.0, 4.0}));
  EXPECT_EQ(optim::clip_by_norm(g, 1.0), 5.0);
  EXPECT_NEAR(optim::l2_norm(g), 1.0, 1e-15);
}

// ---------------------------------------------------------------------------
// Training loop

TEST(Train, NoUpdatesLeavesParametersUnchanged) {
  auto c = small_cartpole(3);
  c.train.attacker_steps = 0;
  c.train.defender_steps = 0;
  const auto e = experiment(c);
  auto [a, d] = train::initial_policies(e.attacker, e.defender, 1);
  const auto r = train::train(*e.model, *e.requirements, e.train, a, d);
  EXPECT_EQ(r.attacker.params, a.params);
  EXPECT_EQ(r.defender.params, d.params);
  EXPECT_TRUE(r.history.empty());
}

TEST(Train, HistoryFollowsSchedule) {
  auto c = small_cartpole(4);
  c.train.attacker_steps = 1;
  c.train.defender_steps = 2;
  const auto e = experiment(c);
  auto [a, d] = train::initial_policies(e.attacker, e.defender, 1);
  std::size_t callbacks = 0;
  const auto r = train::train(*e.model, *e.requirements, e.train, a, d, [&](const train::HistoryRow&) { ++callbacks; });
  ASSERT_EQ(r.history.size(), 12u);
  EXPECT_EQ(callbacks, 12u);
  EXPECT_EQ(r.history[0].phase, train::Phase::attacker);
  EXPECT_EQ(r.history[1].phase, train::Phase::defender);
  EXPECT_EQ(r.history[2].update, 1u);
  EXPECT_EQ(r.history[11].iteration, 3u);
  EXPECT_NE(r.attacker.params, a.params);
  EXPECT_NE(r.defender.params, d.params);
}

TEST(Train, FixedSeedIsBitIdentical) {
  const auto e = experiment(small_cartpole(10));
  auto run = [&] {
    auto [a, d] = train::initial_policies(e.attacker, e.defender, e.train.seed);
    return train::train(*e.model, *e.requirements, e.train, a, d);
  };
  const auto r1 = run(), r2 = run();
  EXPECT_EQ(r1.attacker.params, r2.attacker.params);
  EXPECT_EQ(r1.defender.params, r2.defender.params);
  ASSERT_EQ(r1.history.size(), r2.history.size());
  for (std::size_t i = 0; i < r1.history.size(); ++i) {
    EXPECT_TRUE(same_bits(r1.history[i].objective, r2.history[i].objective));
    EXPECT_TRUE(same_bits(r1.history[i].grad_norm, r2.history[i].grad_norm));
  }
}

TEST(Train, DifferentSeedsDiffer) {
  auto c1 = small_cartpole(3), c2 = small_cartpole(3);
  c2.seed = 1;
  const auto e1 = experiment(c1), e2 = experiment(c2);
  auto [a1, d1] = train::initial_policies(e1.attacker, e1.defender, e1.train.seed);
  auto [a2, d2] = train::initial_policies(e2.attacker, e2.defender, e2.train.seed);
  EXPECT_NE(d1.params, d2.params);
  const auto r1 = train::train(*e1.model, *e1.requirements, e1.train, a1, d1);
  const auto r2 = train::train(*e2.model, *e2.requirements, e2.train, a2, d2);
  EXPECT_NE(r1.history[0].objective, r2.history[0].objective);
}

TEST(Train, ArchitectureAndWindowChecked) {
  const auto e = experiment(small_cartpole());
  auto [a, d] = train::initial_policies(e.attacker, e.defender, 0);
  EXPECT_THROW(train::train(*e.model, *e.requirements, e.train, d, a), std::invalid_argument);
  auto cfg = e.train;
  cfg.window = 6;
  EXPECT_THROW(train::train(*e.model, *e.requirements, cfg, a, d), std::invalid_argument);
  cfg = e.train;
  cfg.horizon = 2;
  EXPECT_THROW(train::train(*e.model, *e.requirements, cfg, a, d), std::invalid_argument);
}

TEST(Train, PersistentDivergenceAborts) {
  // A start far outside the float range after one step: every rollout diverges.
  auto c = small_cartpole(1);
  c.initial_state["x_dot"] = {1e308, 1e308};
  const auto e = experiment(c);
  auto [a, d] = train::initial_policies(e.attacker, e.defender, 0);
  auto cfg = e.train;
  cfg.max_retries = 3;
  try {
    train::train(*e.model, *e.requirements, cfg, a, d);
    FAIL() << "expected NumericAbort";
  } catch (const train::NumericAbort& err) {
    EXPECT_EQ(err.iteration(), 0u);
  }
}

// ---------------------------------------------------------------------------
// Testing

TEST(Test, ViolationGivesNegativeRobustness) {
  systems::CartPole m;
  const auto reqs = systems::cartpole_requirements(m.params(), 10);
  // Target runs away at 5 m/s while the cart stays put.
  sim::GaussianNoise noise(1);
  const std::vector<double> s0(5, 0.0);
  const auto row = train::test(m, reqs, const_agent({0.0}), const_env({0.0, 5.0}), s0, 40, noise);
  EXPECT_LT(row.robustness[0], 0.0);
  EXPECT_FALSE(row.satisfied(0));
}

TEST(Test, MarginInsideBounds) {
  systems::PlatoonBasic m;
  const auto reqs = systems::platoon_requirements(m.params(), 10, false);
  const double ng = m.params().friction * m.params().gravity;
  sim::GaussianNoise noise(1);
  const std::vector<double> s0{4.0, 18.0, 0.0, 18.0};
  const auto row = train::test(m, reqs, const_agent({ng}), const_env({ng}), s0, 50, noise);
  EXPECT_NEAR(row.robustness[0], 3.0, 1e-9);  // min(10 - 4, 4 - 1)
}

TEST(Test, GlobalRobustnessCoversWholeTrajectory) {
  const stl::RequirementSet reqs({{"pos", stl::globally(0, 1, stl::atom(stl::at_least(0, 0.0))), 1.0}}, 2);
  const stl::Trajectory<double> xi({3.0, 2.0, 1.0, 0.5, 4.0}, 1, 0.1);
  EXPECT_EQ(train::global_robustness(reqs, xi), (std::vector<double>{0.5}));
  const stl::Trajectory<double> one({1.0}, 1, 0.1);
  EXPECT_THROW(train::global_robustness(reqs, one), std::invalid_argument);
}

TEST(EvaluateTestset, SingleRowReducesToTest) {
  const auto c = small_cartpole();
  const auto e = experiment(c);
  auto [a, d] = train::initial_policies(e.attacker, e.defender, 2);
  const auto rep = train::evaluate_testset(*e.model, *e.requirements, train::policy_controllers(a, d), e.train.sampler,
                                           1, 60, 17);
  ASSERT_EQ(rep.rows.size(), 1u);
  std::mt19937_64 rng(derive_seed(17, "test-initial-state", 0));
  const auto s0 = e.train.sampler.sample(*e.model, rng);
  sim::GaussianNoise noise(derive_seed(17, "test-noise", 0));
  const auto row = train::test(*e.model, *e.requirements, train::agent_policy(d), train::env_policy(a), s0, 60, noise);
  EXPECT_EQ(rep.rows[0].robustness, row.robustness);
  EXPECT_EQ(rep.rows[0].pairing_hash, row.pairing_hash);
  EXPECT_EQ(rep.rows[0].initial_state, s0);
}

TEST(EvaluateTestset, FractionsOverAllRows) {
  const auto e = experiment(small_cartpole());
  auto [a, d] = train::initial_policies(e.attacker, e.defender, 2);
  const auto rep = train::evaluate_testset(*e.model, *e.requirements, train::policy_controllers(a, d), e.train.sampler,
                                           37, 30, 4);
  const auto s = rep.summary();
  EXPECT_EQ(s.n, 37u);
  for (std::size_t i = 0; i < s.requirements.size(); ++i) {
    double count = 0;
    for (const auto& r : rep.rows) count += r.satisfied(i);
    EXPECT_EQ(s.fraction_positive[i], count / 37.0);
  }
}

TEST(EvaluateTestset, AllSafeCaseIsFullyPositive) {
  auto c = io::platoon_defaults(io::SystemKind::platoon_basic);
  c.initial_state = {{"d", {4.0, 6.0}}, {"v_l", {18.0, 18.0}}, {"v_f", {18.0, 18.0}}};
  const auto e = experiment(c);
  const double ng = c.platoon.friction * c.platoon.gravity;
  train::Controllers ctl{[ng] { return const_agent({ng}); }, [ng] { return const_env({ng}); }};
  const auto s = train::evaluate_testset(*e.model, *e.requirements, ctl, e.train.sampler, 20, 100, 1).summary();
  EXPECT_EQ(s.fraction_positive[0], 1.0);
  EXPECT_EQ(s.failures, 0u);
}

TEST(EvaluateTestset, IndependentOfThreadCount) {
  const auto e = experiment(small_cartpole());
  auto [a, d] = train::initial_policies(e.attacker, e.defender, 8);
  auto run = [&](unsigned threads) {
    return train::evaluate_testset(*e.model, *e.requirements, train::policy_controllers(a, d), e.train.sampler, 25, 40,
                                   6, threads);
  };
  const auto r1 = run(1), r4 = run(4);
  for (std::size_t i = 0; i < 25; ++i) {
    EXPECT_EQ(r1.rows[i].robustness, r4.rows[i].robustness);
    EXPECT_EQ(r1.rows[i].pairing_hash, r4.rows[i].pairing_hash);
  }
}

TEST(EvaluateTestset, FixedEnvironmentAtEquilibrium) {
  auto c = io::cartpole_defaults();
  c.initial_state = {{"x", {0.0, 0.0}}, {"x_dot", {0.0, 0.0}}, {"theta", {0.0, 0.0}}, {"theta_dot", {0.0, 0.0}}};
  const auto e = experiment(c);
  auto [a, d] = train::initial_policies(e.attacker, e.defender, 0);
  std::fill(d.params.begin(), d.params.end(), 0.0);
  const std::vector<std::vector<double>> zeros(200, {0.0, 0.0});
  train::Controllers ctl{[&d] { return train::agent_policy(d); }, [&zeros] { return sim::replay_env<double>(zeros); }};
  const auto rep = train::evaluate_testset(*e.model, *e.requirements, ctl, e.train.sampler, 3, 200, 0);
  for (const auto& r : rep.rows) {
    ASSERT_TRUE(r.ok()) << r.error;
    EXPECT_GT(r.robustness[1], 0.0);
    EXPECT_DOUBLE_EQ(r.robustness[1], 0.785);
  }
}

TEST(EvaluateTestset, RolloutFailuresAreRecorded) {
  const auto e = experiment(small_cartpole());
  train::Controllers ctl{[] { return const_agent({0.0}); },
                         [] { return sim::replay_env<double>(std::vector<std::vector<double>>(5, {0.0, 0.0})); }};
  const auto rep = train::evaluate_testset(*e.model, *e.requirements, ctl, e.train.sampler, 3, 20, 0);
  for (const auto& r : rep.rows) {
    EXPECT_FALSE(r.ok());
    EXPECT_FALSE(r.satisfied(0));
  }
  EXPECT_EQ(rep.summary().failures, 3u);
  EXPECT_TRUE(std::isnan(rep.summary().mean_robustness[0]));
}

TEST(Compare, PairedArmsShareInputs) {
  const auto e = experiment(io::platoon_defaults(io::SystemKind::platoon_basic));
  auto [a, d] = train::initial_policies(e.attacker, e.defender, 3);
  const auto learned = train::policy_controllers(a, d);
  train::Controllers fixed{[] { return const_agent({0.5}); }, learned.attacker};
  const auto rows = train::compare(*e.model, *e.requirements, learned, fixed, e.train.sampler, 12, 50, 9);
  ASSERT_EQ(rows.size(), 12u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.first.pairing_hash, r.second.pairing_hash);
    EXPECT_EQ(r.first.initial_state, r.second.initial_state);
    ASSERT_EQ(r.difference.size(), 1u);
    EXPECT_EQ(r.difference[0], r.first.robustness[0] - r.second.robustness[0]);
  }
}

TEST(Compare, IdenticalArmsHaveZeroDifference) {
  const auto e = experiment(io::platoon_defaults(io::SystemKind::platoon_basic));
  auto [a, d] = train::initial_policies(e.attacker, e.defender, 3);
  const auto ctl = train::policy_controllers(a, d);
  for (const auto& r : train::compare(*e.model, *e.requirements, ctl, ctl, e.train.sampler, 8, 30, 2))
    EXPECT_EQ(r.difference[0], 0.0);
}

TEST(ParallelFor, VisitsEveryIndexOnceAndPropagatesErrors) {
  std::vector<int> hits(1000, 0);
  train::parallel_for(1000, 8, [&](std::size_t i) { ++hits[i]; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(train::parallel_for(10, 4, [](std::size_t i) { if (i == 7) throw std::runtime_error("x"); }),
               std::runtime_error);
}

TEST(Sampler, RangesAndOrder) {
  systems::PlatoonBasic m;
  InitialStateSampler s({"d", "v_l", "v_f"}, {{2.0, 6.0}, {15.0, 20.0}, {16.0, 16.0}});
  std::mt19937_64 rng(1);
  for (int k = 0; k < 100; ++k) {
    const auto x = s.sample(m, rng);
    EXPECT_GE(x[0], 2.0);
    EXPECT_LT(x[0], 6.0);
    EXPECT_EQ(x[2], 0.0);
    EXPECT_EQ(x[3], 16.0);
  }
  InitialStateSampler wrong({"v_l", "d", "v_f"}, {{0, 1}, {0, 1}, {0, 1}});
  EXPECT_THROW(wrong.check(m), std::invalid_argument);
  EXPECT_THROW(InitialStateSampler({"d"}, {{2.0, 1.0}}), std::invalid_argument);
}
