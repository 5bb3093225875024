// Subcommands of the depslab executable. Each returns the process exit code:
// 0 on success, 1 on a runtime failure, 2 on a bad configuration.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace depslab::cli {

// Settings common to every subcommand.
struct CommonArgs {
  std::optional<std::string> env;
  std::optional<std::string> config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> seeds;
  std::string out = ".";
};

struct TrainArgs {
  CommonArgs common;
  std::optional<std::string> algo;
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> batch;
};

struct RadeArgs {
  CommonArgs common;
  std::optional<std::string> grid_dims;
  std::optional<std::string> grid_steps;
  std::optional<std::string> grid_origin;
  std::optional<std::string> components;
  std::optional<std::size_t> iterations;
};

struct RulebasedArgs {
  CommonArgs common;
  int policy = 2;
  std::optional<std::size_t> budget;
};

struct ReportArgs {
  std::vector<std::string> runs;
  std::string out;
  std::string title;
};

// Defaults, then the config file, then flags.
ExperimentConfig load_experiment(const CommonArgs& args);

int cmd_train(const TrainArgs& args);
int cmd_rade(const RadeArgs& args);
int cmd_rulebased(const RulebasedArgs& args);
int cmd_report(const ReportArgs& args);

}  // namespace depslab::cli
