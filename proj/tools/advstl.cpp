// Command-line front end: advstl {train|test|rollout|compare} [options]

#include <advstl/cli/commands.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <string>

namespace {

void add_common(CLI::App* cmd, advstl::cli::CommonOptions& o, const char* out_help) {
  cmd->add_option("--config", o.config_path, "Experiment config (JSON)");
  cmd->add_option("--preset", o.preset, "Named preset: cartpole_table1, platoon_table2");
  cmd->add_option("--seed", o.seed, "Root seed (overrides the config)");
  cmd->add_option("--out", o.out, out_help);
}

void add_weights(CLI::App* cmd, advstl::cli::WeightOptions& o) {
  cmd->add_option("--attacker", o.attacker_path, "Attacker weight file (default <out>/attacker.json)");
  cmd->add_option("--defender", o.defender_path, "Defender weight file (default <out>/defender.json)");
}

void add_test(CLI::App* cmd, advstl::cli::TestOptions& o) {
  add_weights(cmd, o);
  cmd->add_option("--n", o.n, "Number of test trajectories");
  cmd->add_option("--horizon", o.horizon, "Steps per test trajectory");
  cmd->add_option("--mode", o.mode, "adversarial or fixed-env")->check(CLI::IsMember({"adversarial", "fixed-env"}));
  cmd->add_option("--actions", o.actions_path, "Recorded environment actions (CSV) for fixed-env mode");
  cmd->add_option("--threads", o.threads, "Worker threads (0: all cores)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial attacker/defender training under STL requirements"};
  app.require_subcommand(1);

  advstl::cli::TrainOptions train;
  auto* t = app.add_subcommand("train", "Train attacker and defender networks");
  add_common(t, train, "Output directory");

  advstl::cli::TestOptions test;
  auto* s = app.add_subcommand("test", "Evaluate a trained defender on a sampled test set");
  add_common(s, test, "Output directory (also the default weight location)");
  add_test(s, test);

  advstl::cli::RolloutOptions roll;
  auto* r = app.add_subcommand("rollout", "Export one trajectory as CSV");
  add_common(r, roll, "Output CSV file (default <output_dir>/rollout.csv)");
  add_weights(r, roll);
  r->add_option("--s0", roll.s0, "Initial variables, comma separated")->delimiter(',');
  r->add_flag("--sample", roll.sample, "Sample the initial state from the config ranges");
  r->add_option("--horizon", roll.horizon, "Number of steps");
  r->add_option("--actions", roll.actions_path, "Replay recorded environment actions (CSV)");

  advstl::cli::CompareOptions cmp;
  auto* c = app.add_subcommand("compare", "Paired comparison of the defender against a classical baseline");
  add_common(c, cmp, "Output directory (also the default weight location)");
  add_test(c, cmp);
  c->add_option("--baseline", cmp.baseline, "pid (platoon) or smc (cart-pole)")->check(CLI::IsMember({"pid", "smc"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : advstl::cli::exit_usage;
  }

  if (t->parsed()) return advstl::cli::cmd_train(train);
  if (s->parsed()) return advstl::cli::cmd_test(test);
  if (r->parsed()) return advstl::cli::cmd_rollout(roll);
  return advstl::cli::cmd_compare(cmp);
}
