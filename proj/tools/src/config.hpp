// Experiment configuration: built-in per-environment defaults, overridden by
// an INI-style file, overridden by command-line flags.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "depslab/anneal.hpp"
#include "depslab/jodc.hpp"
#include "depslab/train.hpp"

namespace depslab::cli {

// Invalid configuration or arguments; the CLI exits with status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RadeSettings {
  std::vector<std::string> components = {"omega", "zeta"};
  std::vector<double> origin = {0.1, 0.1};
  std::vector<double> step = {0.082, 0.082};
  std::vector<std::size_t> count = {15, 15};
  // Remaining design components; empty when the environment has no default.
  std::vector<double> base;
  std::size_t iterations = 2000;
};

struct ExperimentConfig {
  std::string algorithm = "deps";
  std::string environment = "msd";
  // batch, iterations and evaluation settings here are shared with jodc.
  algo::DepsConfig deps;
  algo::JodcConfig jodc;
  algo::AnnealConfig anneal;
  RadeSettings rade;
  std::vector<std::uint64_t> seeds;
};

// Default settings for an environment. Throws ConfigError on unknown names.
ExperimentConfig defaults_for(const std::string& environment);

// Parsed `[section]` / `key = value` text. Keys before any header belong to
// [train]. '#' and ';' start comments.
struct IniEntry {
  std::string value;
  int line = 0;
};
using Ini = std::map<std::string, std::map<std::string, IniEntry>>;

Ini parse_ini(const std::string& text, const std::string& source);
Ini read_ini(const std::string& path);

// Defaults for the environment named by `environment` (or the file's env key,
// or msd), then every file value. Unknown sections or keys and bad values
// throw ConfigError with the line number.
ExperimentConfig resolve(const Ini& ini, const std::string& source,
                         const std::optional<std::string>& environment);

// Seeds as configured, else DEPSLAB_SEED, else 0..9.
std::vector<std::uint64_t> effective_seeds(const ExperimentConfig& config);

// Comma-separated fields, each trimmed.
std::vector<std::string> split_list(const std::string& text);
std::vector<double> parse_list(const std::string& text, const std::string& where);
std::vector<std::uint64_t> parse_seed_list(const std::string& text, const std::string& where);

}  // namespace depslab::cli
