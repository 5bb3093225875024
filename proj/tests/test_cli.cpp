#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "commands.hpp"
#include "config.hpp"
#include "depslab/environment.hpp"

namespace depslab::cli {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "depslab_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t line_count(const fs::path& p) {
  const std::string text = slurp(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

int run_tool(const std::string& args, const fs::path& log) {
  const std::string command =
      std::string(DEPSLAB_TOOL_PATH) + " " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, DefaultsMatchThePublishedSettings) {
  struct Expected {
    const char* env;
    double step;
    double jodc_policy;
    double jodc_design;
    int horizon;
  };
  for (const Expected& e : {Expected{"msd", 0.005, 0.001, 0.005, 100},
                            Expected{"microgrid", 0.001, 0.001, 0.001, 120},
                            Expected{"drone", 0.00005, 0.00005, 0.0005, 100}}) {
    const ExperimentConfig c = defaults_for(e.env);
    EXPECT_EQ(c.deps.design_step, e.step) << e.env;
    EXPECT_EQ(c.deps.policy_step, e.step) << e.env;
    EXPECT_EQ(c.jodc.policy_step, e.jodc_policy) << e.env;
    EXPECT_EQ(c.jodc.design_step, e.jodc_design) << e.env;
    EXPECT_EQ(c.deps.batch, 64u);
    EXPECT_EQ(c.jodc.batch, 64u);
    EXPECT_EQ(c.deps.eval_samples, 64u);
    EXPECT_EQ(c.jodc.ppo_epochs, 5u);
    EXPECT_EQ(c.jodc.ppo_clip, 0.1);
    EXPECT_FALSE(c.jodc.prefit_iterations);
    EXPECT_FALSE(c.jodc.condition_on_design);
    EXPECT_TRUE(c.jodc.design_baseline);
    EXPECT_EQ(env::make_environment(e.env)->descriptor().horizon, e.horizon);
  }
  EXPECT_THROW(defaults_for("pendulum"), ConfigError);
}

TEST(Cli, DesignSpacesAndScales) {
  const auto msd = env::make_environment("msd")->descriptor();
  EXPECT_EQ(msd.design_space.lower, (std::vector<double>{0.1, 0.1, -2, -2, -2}));
  EXPECT_EQ(msd.design_space.upper, (std::vector<double>{1.5, 1.5, 2, 2, 2}));
  const auto mg = env::make_environment("microgrid")->descriptor();
  EXPECT_EQ(mg.design_scale, (std::vector<double>{100, 100, 8}));
  const auto drone = env::make_environment("drone")->descriptor();
  EXPECT_EQ(drone.design_scale, (std::vector<double>{0.2, 0.2, 0.01, 0.01}));
  EXPECT_EQ(drone.design_space.upper, (std::vector<double>{0.2, 0.2, 0.01, 0.01}));
  const auto toy = env::make_environment("toy")->descriptor();
  EXPECT_EQ(toy.horizon, 2);
  EXPECT_EQ(toy.design_space.lower, (std::vector<double>{-1, -1}));
  EXPECT_EQ(toy.design_space.upper, (std::vector<double>{1, 1}));
  const ExperimentConfig c = defaults_for("msd");
  EXPECT_EQ(c.rade.origin, (std::vector<double>{0.1, 0.1}));
  EXPECT_EQ(c.rade.count, (std::vector<std::size_t>{15, 15}));
}

TEST(Cli, EmptyFileGivesTheDefaults) {
  const ExperimentConfig c = resolve(parse_ini("# nothing\n\n", "empty.ini"), "empty.ini", {});
  const ExperimentConfig d = defaults_for("msd");
  EXPECT_EQ(c.environment, "msd");
  EXPECT_EQ(c.deps.batch, d.deps.batch);
  EXPECT_EQ(c.deps.iterations, d.deps.iterations);
  EXPECT_EQ(c.deps.design_step, d.deps.design_step);
  EXPECT_TRUE(c.seeds.empty());
}

TEST(Cli, FileValuesOverrideDefaults) {
  const Ini ini = parse_ini(
      "batch = 4\nenv = microgrid\n[jodc]\nppo_clip = 0.2 ; wider\n[anneal]\nsamples=8\n", "x.ini");
  const ExperimentConfig c = resolve(ini, "x.ini", {});
  EXPECT_EQ(c.environment, "microgrid");
  EXPECT_EQ(c.deps.batch, 4u);
  EXPECT_EQ(c.jodc.batch, 4u);
  EXPECT_EQ(c.deps.design_step, 0.001);
  EXPECT_EQ(c.jodc.ppo_clip, 0.2);
  EXPECT_EQ(c.anneal.samples, 8u);
  EXPECT_EQ(resolve(ini, "x.ini", std::string("drone")).environment, "drone");
}

TEST(Cli, ErrorsNameTheKeyAndLine) {
  try {
    parse_ini("batch = 4\n\nbacth = 5\n", "typo.ini");
    FAIL() << "accepted an unknown key";
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("typo.ini:3"), std::string::npos) << what;
    EXPECT_NE(what.find("bacth"), std::string::npos) << what;
  }
  EXPECT_THROW(parse_ini("[nope]\n", "s.ini"), ConfigError);
  EXPECT_THROW(parse_ini("batch 4\n", "s.ini"), ConfigError);
  EXPECT_THROW(parse_ini("batch = 1\nbatch = 2\n", "s.ini"), ConfigError);
  try {
    resolve(parse_ini("\nbatch = four\n", "v.ini"), "v.ini", {});
    FAIL() << "accepted a bad value";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("v.ini:2"), std::string::npos) << e.what();
  }
}

TEST(Cli, SeedLists) {
  EXPECT_EQ(parse_seed_list(" 3, 1,4 ", "x"), (std::vector<std::uint64_t>{3, 1, 4}));
  EXPECT_THROW(parse_seed_list("1,-2", "x"), ConfigError);
  ExperimentConfig c = defaults_for("toy");
  c.seeds = {7};
  EXPECT_EQ(effective_seeds(c), (std::vector<std::uint64_t>{7}));
}

TEST(Cli, TrainWritesOneRowPerIteration) {
  const fs::path out = scratch("train");
  ASSERT_EQ(run_tool("train --env toy --iters 50 --batch 8 --seed 1 --out " + out.string(),
                     out / "log.txt"),
            0)
      << slurp(out / "log.txt");
  EXPECT_EQ(line_count(out / "run_seed1.csv"), 51u);
  EXPECT_TRUE(fs::exists(out / "policy_seed1.bin"));
  EXPECT_EQ(line_count(out / "summary.csv"), 2u);
  EXPECT_EQ(line_count(out / "finals.csv"), 2u);
}

TEST(Cli, IdenticalRunsWriteIdenticalBytes) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  const std::string args = "train --env msd --iters 3 --batch 4 --seeds 2,5 --out ";
  ASSERT_EQ(run_tool(args + a.string(), a / "log.txt"), 0) << slurp(a / "log.txt");
  ASSERT_EQ(run_tool(args + b.string(), b / "log.txt"), 0) << slurp(b / "log.txt");
  for (const char* f : {"run_seed2.csv", "run_seed5.csv", "summary.csv", "finals.csv",
                        "policy_seed2.bin"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_FALSE(slurp(a / f).empty()) << f;
  }
}

TEST(Cli, ExitCodes) {
  const fs::path out = scratch("codes");
  const fs::path log = out / "log.txt";
  EXPECT_EQ(run_tool("rulebased --env drone --out " + out.string(), log), 2);
  EXPECT_NE(slurp(log).find("drone"), std::string::npos);
  EXPECT_EQ(run_tool("train --env nowhere --out " + out.string(), log), 2);
  EXPECT_EQ(run_tool("train --algo sgd --env toy --out " + out.string(), log), 2);
  EXPECT_EQ(run_tool("train --env toy --seed 1 --seeds 2 --out " + out.string(), log), 2);
  EXPECT_EQ(run_tool("bogus", log), 2);
  std::ofstream(out / "bad.ini") << "iterations = 10\nalpha = 3\n";
  EXPECT_EQ(run_tool("train --config " + (out / "bad.ini").string() + " --out " + out.string(), log),
            2);
  EXPECT_NE(slurp(log).find(":2"), std::string::npos) << slurp(log);
}

TEST(Cli, RadeWritesOneRowPerCell) {
  const fs::path out = scratch("rade");
  std::ofstream(out / "grid.ini") << "[rade]\ncomponents = psi1, psi2\norigin = -1, -1\n"
                                     "step = 0.5, 0.4\ncount = 2, 3\nbase = 0, 0\niterations = 5\n";
  ASSERT_EQ(run_tool("rade --env toy --seed 1 --config " + (out / "grid.ini").string() + " --out " +
                         out.string(),
                     out / "log.txt"),
            0)
      << slurp(out / "log.txt");
  EXPECT_EQ(line_count(out / "rade.csv"), 1u + 6u);
  EXPECT_EQ(slurp(out / "rade.csv").rfind("psi1,psi2,best_return\n", 0), 0u);
  EXPECT_NE(slurp(out / "log.txt").find("argmax"), std::string::npos);
}

TEST(Cli, RulebasedWritesTraceAndSummary) {
  const fs::path out = scratch("rulebased");
  ASSERT_EQ(run_tool("rulebased --env msd --policy 2 --budget 20 --seed 3 --out " + out.string(),
                     out / "log.txt"),
            0)
      << slurp(out / "log.txt");
  EXPECT_LE(line_count(out / "rulebased_trace.csv"), 21u);
  EXPECT_EQ(line_count(out / "rulebased_summary.csv"), 2u);
}

TEST(Cli, ReportDrawsSingleRunsAndFlagsTruncation) {
  const fs::path out = scratch("report");
  const fs::path runs = out / "deps";
  fs::create_directories(runs);
  std::ofstream(runs / "run_seed0.csv")
      << "iter,return_mean,sigma_minus,sigma_plus\n0,1,0,0\n1,2,0,0\n2,3,0,0\n";
  std::ofstream(runs / "run_seed1.csv") << "iter,return_mean,sigma_minus,sigma_plus\n0,1,0,0\n";
  ASSERT_EQ(run_tool("report --runs " + (runs / "run_seed0.csv").string() + " --out " +
                         (out / "one.svg").string(),
                     out / "log.txt"),
            0);
  EXPECT_NE(slurp(out / "one.svg").find("run_seed0"), std::string::npos);
  EXPECT_EQ(slurp(out / "log.txt").find("warning"), std::string::npos);

  ASSERT_EQ(run_tool("report --runs " + runs.string() + " --title cut --out " +
                         (out / "cut.svg").string(),
                     out / "log.txt"),
            0);
  EXPECT_NE(slurp(out / "log.txt").find("warning"), std::string::npos);
  EXPECT_EQ(run_tool("report --runs " + (out / "missing").string() + " --out " +
                         (out / "x.svg").string(),
                     out / "log.txt"),
            2);
}

}  // namespace
}  // namespace depslab::cli
