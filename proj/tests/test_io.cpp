#include <advstl/io/config.hpp>
#include <advstl/io/csv.hpp>
#include <advstl/io/formula_json.hpp>
#include <advstl/io/weights.hpp>

#include <gtest/gtest.h>

#include "support/random_formula.hpp"

#include <bit>
#include <limits>
#include <random>
#include <sstream>

using namespace advstl;
using nlohmann::json;

// ---------------------------------------------------------------------------
// CSV

TEST(Csv, NumbersRoundTripExactly) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> bits;
  for (int k = 0; k < 10000; ++k) {
    double v = std::bit_cast<double>(bits(rng));
    if (std::isnan(v)) continue;
    EXPECT_EQ(std::bit_cast<std::uint64_t>(io::parse_double(io::format_double(v))), std::bit_cast<std::uint64_t>(v));
  }
  EXPECT_EQ(io::format_double(0.1), "0.1");
  EXPECT_EQ(io::format_double(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_TRUE(std::isnan(io::parse_double("nan")));
  EXPECT_EQ(io::parse_double(" 2.5\r"), 2.5);
  EXPECT_THROW(io::parse_double("2.5x"), std::invalid_argument);
  EXPECT_THROW(io::parse_double(""), std::invalid_argument);
}

TEST(Csv, WriterAndReaderAgree) {
  std::ostringstream os;
  io::CsvWriter w(os);
  w.header({"sample", "rho", "ok"});
  w.cell(std::size_t{0}).cell(-0.25).cell(true).end();
  w.cell(std::size_t{1}).empty().cell(false).end();
  EXPECT_EQ(os.str(), "sample,rho,ok\n0,-0.25,1\n1,,0\n");
  std::istringstream is(os.str());
  const auto t = io::read_csv(is);
  EXPECT_EQ(t.column("rho"), 1u);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1][1], "");
  EXPECT_THROW(t.column("missing"), std::invalid_argument);
}

TEST(Csv, QuotesTextCells) {
  std::ostringstream os;
  io::CsvWriter(os).cell("a,b").cell("say \"hi\"").end();
  EXPECT_EQ(os.str(), "\"a,b\",\"say \"\"hi\"\"\"\n");
}

TEST(Csv, RaggedRowsRejected) {
  std::istringstream is("a,b\n1,2\n3\n");
  EXPECT_THROW(io::read_csv(is), std::invalid_argument);
  std::istringstream empty("");
  EXPECT_THROW(io::read_csv(empty), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Config

TEST(Config, ResolvedFormRoundTrips) {
  for (const auto& name : io::preset_names()) {
    const auto c = io::preset(name);
    const auto j = io::to_json(c);
    EXPECT_EQ(io::to_json(io::parse_config(j)), j) << name;
  }
  auto chain = io::platoon_defaults(io::SystemKind::platoon_chain, 4);
  EXPECT_EQ(io::to_json(io::parse_config(io::to_json(chain))), io::to_json(chain));
}

TEST(Config, PresetOverrides) {
  const auto c = io::parse_config(json::parse(R"({"preset": "cartpole_table1", "seed": 9,
      "train": {"iterations": 3}, "cartpole": {"friction_max": 0.8}})"));
  EXPECT_EQ(c.system, io::SystemKind::cartpole);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.train.iterations, 3u);
  EXPECT_EQ(c.train.window, io::cartpole_defaults().train.window);
  EXPECT_EQ(c.cartpole.friction_max, 0.8);
}

TEST(Config, PlatoonPresetIsEnergyVariant) {
  EXPECT_EQ(io::preset("platoon_table2").system, io::SystemKind::platoon_energy);
  EXPECT_THROW(io::preset("nope"), io::ConfigError);
}

TEST(Config, RejectsUnknownAndMisplacedKeys) {
  auto bad = [](const char* text) { return io::parse_config(json::parse(text)); };
  EXPECT_THROW(bad(R"({"preset": "cartpole_table1", "colour": 1})"), io::ConfigError);
  EXPECT_THROW(bad(R"({"preset": "cartpole_table1", "train": {"learning_rat": 1}})"), io::ConfigError);
  EXPECT_THROW(bad(R"({"preset": "cartpole_table1", "platoon": {}})"), io::ConfigError);
  EXPECT_THROW(bad(R"({"system": "platoon_basic", "cartpole": {}})"), io::ConfigError);
  EXPECT_THROW(bad(R"({"system": "submarine"})"), io::ConfigError);
  EXPECT_THROW(bad(R"({"seed": 1})"), io::ConfigError);
  EXPECT_THROW(bad(R"({"system": "platoon_basic", "cars": 3})"), io::ConfigError);
  EXPECT_THROW(bad(R"({"preset": "cartpole_table1", "train": {"iterations": "many"}})"), io::ConfigError);
  EXPECT_THROW(bad(R"({"preset": "cartpole_table1", "train": {"iterations": -1}})"), io::ConfigError);
  EXPECT_THROW(bad(R"({"preset": "cartpole_table1", "initial_state": {"x": [1, 0]}})"), io::ConfigError);
  EXPECT_THROW(bad(R"({"preset": "cartpole_table1", "window_relative": ["x"]})"), io::ConfigError);
}

TEST(Config, BuildChecksConsistency) {
  auto c = io::cartpole_defaults();
  c.initial_state.erase("theta");
  EXPECT_THROW(io::build(c), io::ConfigError);
  c = io::cartpole_defaults();
  c.initial_state["speed"] = {0, 1};
  EXPECT_THROW(io::build(c), io::ConfigError);
  c = io::cartpole_defaults();
  c.train.window = 50;  // longer than the horizon
  EXPECT_THROW(io::build(c), io::ConfigError);
  c = io::cartpole_defaults();
  c.cartpole.half_length = -1.0;
  EXPECT_THROW(io::build(c), io::ConfigError);
}

TEST(Config, CustomRequirements) {
  const auto c = io::parse_config(json::parse(R"({"system": "platoon_basic",
      "requirements": [{"name": "gap", "weight": 2,
                        "formula": {"globally": {"interval": [0, 3], "arg": {"between": ["d", 1, 10]}}}}]})"));
  const auto e = io::build(c);
  ASSERT_EQ(e.requirements->size(), 1u);
  EXPECT_EQ(e.requirements->items()[0].name, "gap");
  auto bad = c;
  (*bad.requirements)[0].formula = json::parse(R"({"le": ["gap", 3]})");
  EXPECT_THROW(io::build(bad), io::ConfigError);
}

TEST(Config, HashIgnoresSeedTestAndOutput) {
  const auto a = io::cartpole_defaults();
  auto b = a;
  b.seed = 123;
  b.output_dir = "elsewhere";
  b.test.n = 5;
  EXPECT_EQ(io::config_hash(a), io::config_hash(b));
  b.train.defender_opt.learning_rate *= 2;
  EXPECT_NE(io::config_hash(a), io::config_hash(b));
  EXPECT_EQ(io::hash_hex(0xabc).size(), 16u);
  EXPECT_EQ(io::hash_hex(0xabc), "0000000000000abc");
}

TEST(Config, LoadReportsMissingAndMalformedFiles) {
  EXPECT_THROW(io::load_config("/nonexistent/config.json"), io::ConfigError);
  const auto path = std::filesystem::temp_directory_path() / "advstl-io-bad.json";
  std::ofstream(path) << "{ not json";
  EXPECT_THROW(io::load_config(path.string()), io::ConfigError);
  std::filesystem::remove(path);
}

// ---------------------------------------------------------------------------
// Weights

namespace {

io::WeightFile sample_weights() {
  io::WeightFile w;
  w.role = "defender";
  w.spec = {5, {10, 10}, {-30.0}, {30.0}};
  std::mt19937_64 rng(4);
  w.params = policy::init_params(rng, w.spec);
  w.params[3] = 0.1 + 0.2;  // non-terminating decimal
  w.params[4] = std::numeric_limits<double>::denorm_min();
  w.config_hash = io::hash_hex(io::config_hash(io::cartpole_defaults()));
  return w;
}

}  // namespace

TEST(Weights, FileRoundTripIsBitExact) {
  const auto w = sample_weights();
  const auto path = (std::filesystem::temp_directory_path() / "advstl-io-weights.json").string();
  io::save_weights(path, w);
  const auto r = io::load_weights(path);
  std::filesystem::remove(path);
  EXPECT_EQ(r.role, w.role);
  EXPECT_EQ(r.spec, w.spec);
  EXPECT_EQ(r.config_hash, w.config_hash);
  ASSERT_EQ(r.params.size(), w.params.size());
  for (std::size_t i = 0; i < w.params.size(); ++i)
    EXPECT_EQ(std::bit_cast<std::uint64_t>(r.params[i]), std::bit_cast<std::uint64_t>(w.params[i]));
}

TEST(Weights, MalformedFilesRejected) {
  const auto good = io::to_json(sample_weights());
  auto broken = [&](auto&& edit) {
    json j = good;
    edit(j);
    return j;
  };
  EXPECT_THROW(io::weights_from_json(broken([](json& j) { j["format"] = "other"; })), io::WeightError);
  EXPECT_THROW(io::weights_from_json(broken([](json& j) { j["version"] = 99; })), io::WeightError);
  EXPECT_THROW(io::weights_from_json(broken([](json& j) { j.erase("params"); })), io::WeightError);
  EXPECT_THROW(io::weights_from_json(broken([](json& j) { j["params"].erase(0); })), io::WeightError);
  EXPECT_THROW(io::weights_from_json(broken([](json& j) { j["role"] = "referee"; })), io::WeightError);
  EXPECT_THROW(io::weights_from_json(broken([](json& j) { j["layers"] = {5}; })), io::WeightError);
  EXPECT_THROW(io::weights_from_json(broken([](json& j) { j["params"][0] = "x"; })), io::WeightError);
  EXPECT_THROW(io::load_weights("/nonexistent/w.json"), io::WeightError);
}

TEST(Weights, CheckedPolicyMatchesRoleArchitectureAndConfig) {
  const auto w = sample_weights();
  const auto& hash = w.config_hash;
  EXPECT_NO_THROW(io::checked_policy(w, "defender", w.spec, hash));
  EXPECT_THROW(io::checked_policy(w, "attacker", w.spec, hash), io::WeightError);
  auto other = w.spec;
  other.hidden = {10};
  EXPECT_THROW(io::checked_policy(w, "defender", other, hash), io::WeightError);
  EXPECT_THROW(io::checked_policy(w, "defender", w.spec, "0000000000000000"), io::WeightError);
}

// ---------------------------------------------------------------------------
// Formula JSON

TEST(FormulaJson, ShorthandForms) {
  const std::vector<std::string> names{"a", "b"};
  const stl::Trajectory<double> xi({1.0, 5.0, 2.0, 6.0}, 2, 0.1);
  auto rho = [&](const char* text) { return stl::robustness(io::formula_from_json(json::parse(text), names), xi, 0); };
  EXPECT_EQ(rho(R"({"le": ["a", 3]})"), 2.0);
  EXPECT_EQ(rho(R"({"ge": ["b", 4]})"), 1.0);
  EXPECT_EQ(rho(R"({"between": ["a", 0, 1.5]})"), 0.5);
  EXPECT_EQ(rho(R"({"atom": {"terms": [["b", 1], ["a", -1]], "offset": -1}})"), 3.0);
  EXPECT_EQ(rho(R"({"and": [{"le": ["a", 3]}, {"ge": ["b", 4]}, {"ge": ["a", 0.5]}]})"), 0.5);
  EXPECT_EQ(rho(R"({"globally": {"interval": [0, 1], "arg": {"le": ["a", 3]}}})"), 1.0);
  EXPECT_EQ(rho(R"({"not": {"eventually": {"interval": [0, 1], "arg": {"le": ["a", 3]}}}})"), -2.0);
  EXPECT_EQ(rho(R"({"until": {"interval": [0, 1], "left": "true", "right": {"ge": ["a", 2]}}})"), 0.0);
}

TEST(FormulaJson, CanonicalRoundTrip) {
  std::mt19937_64 rng(12);
  const support::FormulaGen gen;
  const std::vector<std::string> names{"s0", "s1", "s2"};
  const auto data = support::random_states(rng, 16, 3);
  const stl::Trajectory<double> xi(data, 3, 0.1);
  for (int k = 0; k < 200; ++k) {
    const auto f = gen(rng);
    const auto j = io::formula_to_json(f, names);
    const auto back = io::formula_from_json(j, names);
    EXPECT_EQ(io::formula_to_json(back, names), j);
    if (stl::temporal_depth(f) < 16) {
      const double a = stl::robustness(f, xi, 0), b = stl::robustness(back, xi, 0);
      EXPECT_EQ(std::bit_cast<std::uint64_t>(a), std::bit_cast<std::uint64_t>(b));
    }
  }
}

TEST(FormulaJson, ErrorsAreReported) {
  const std::vector<std::string> names{"a"};
  auto parse = [&](const char* text) { return io::formula_from_json(json::parse(text), names); };
  EXPECT_THROW(parse(R"({"le": ["z", 1]})"), io::FormulaError);
  EXPECT_THROW(parse(R"({"le": ["a"]})"), io::FormulaError);
  EXPECT_THROW(parse(R"({"xor": []})"), io::FormulaError);
  EXPECT_THROW(parse(R"({"le": ["a", 1], "ge": ["a", 0]})"), io::FormulaError);
  EXPECT_THROW(parse(R"({"globally": {"interval": [3, 1], "arg": "true"}})"), io::FormulaError);
  EXPECT_THROW(parse(R"({"globally": {"interval": [0, 1]}})"), io::FormulaError);
  EXPECT_THROW(parse(R"({"globally": {"interval": [0, 1], "arg": "true", "extra": 1}})"), io::FormulaError);
  EXPECT_THROW(parse(R"({"atom": {"terms": []}})"), io::FormulaError);
  EXPECT_THROW(parse(R"({"and": [{"le": ["a", 1]}]})"), io::FormulaError);
  EXPECT_THROW(parse(R"("false")"), io::FormulaError);
}
