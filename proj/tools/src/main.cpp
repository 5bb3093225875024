#include <CLI11.hpp>

#include "commands.hpp"

namespace {

void add_common(CLI::App& cmd, depslab::cli::CommonArgs& common, bool with_seeds) {
  cmd.add_option("--env", common.env, "Environment: msd, microgrid, drone or toy");
  cmd.add_option("--config", common.config_file, "INI file with [train], [jodc], [anneal], [rade]")
      ->check(CLI::ExistingFile);
  cmd.add_option("--seed", common.seed, "Single master seed");
  if (with_seeds) cmd.add_option("--seeds", common.seeds, "Comma-separated master seeds");
  cmd.add_option("--out", common.out, "Output directory")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  using namespace depslab::cli;
  CLI::App app{"Joint design and control optimization of stochastic dynamical systems"};
  app.require_subcommand(1);

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train with deps, jodc or reinforce");
  add_common(*train_cmd, train.common, true);
  train_cmd->add_option("--algo", train.algo, "deps, jodc or reinforce");
  train_cmd->add_option("--iters", train.iterations, "Number of iterations");
  train_cmd->add_option("--batch", train.batch, "Histories per iteration");

  RadeArgs rade;
  CLI::App* rade_cmd = app.add_subcommand("rade", "REINFORCE on a grid of designs");
  add_common(*rade_cmd, rade.common, false);
  rade_cmd->add_option("--grid-dims", rade.grid_dims, "Cells per axis, e.g. 15,15");
  rade_cmd->add_option("--grid-steps", rade.grid_steps, "Spacing per axis, e.g. 0.082,0.082");
  rade_cmd->add_option("--grid-origin", rade.grid_origin, "Origin per axis; values are origin + k*step, k >= 1");
  rade_cmd->add_option("--components", rade.components, "Two design components, e.g. omega,zeta");
  rade_cmd->add_option("--iters", rade.iterations, "REINFORCE iterations per cell");

  RulebasedArgs rule;
  CLI::App* rule_cmd = app.add_subcommand("rulebased", "Dual annealing with a rule-based policy");
  add_common(*rule_cmd, rule.common, false);
  rule_cmd->add_option("--policy", rule.policy, "Rule-based policy 1 or 2")->capture_default_str();
  rule_cmd->add_option("--budget", rule.budget, "Objective evaluations");

  ReportArgs report;
  CLI::App* report_cmd = app.add_subcommand("report", "Learning-curve SVG from run directories");
  report_cmd->add_option("--runs", report.runs, "Run directories or CSV files, one series each")
      ->required();
  report_cmd->add_option("--out", report.out, "Output SVG file")->required();
  report_cmd->add_option("--title", report.title, "Plot title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (*train_cmd) return cmd_train(train);
  if (*rade_cmd) return cmd_rade(rade);
  if (*rule_cmd) return cmd_rulebased(rule);
  return cmd_report(report);
}
