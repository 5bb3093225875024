#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "depslab/random.hpp"

namespace depslab::cli {

ExperimentConfig defaults_for(const std::string& environment) {
  ExperimentConfig c;
  c.environment = environment;
  c.deps.batch = 64;
  c.deps.eval_samples = 64;
  c.deps.eval_every = 1;
  c.jodc.ppo_epochs = 5;
  c.jodc.ppo_clip = 0.1;
  if (environment == "msd") {
    c.deps.design_step = c.deps.policy_step = 0.005;
    c.deps.iterations = 2000;
    c.jodc.policy_step = 0.001;
    c.jodc.design_step = 0.005;
    c.rade.base = {0.5, 0.5, 0.5, -0.3, 0.2};
  } else if (environment == "microgrid") {
    c.deps.design_step = c.deps.policy_step = 0.001;
    c.deps.iterations = 2000;
    c.jodc.policy_step = 0.001;
    c.jodc.design_step = 0.001;
  } else if (environment == "drone") {
    c.deps.design_step = c.deps.policy_step = 0.00005;
    c.deps.iterations = 5000;
    c.jodc.policy_step = 0.00005;
    c.jodc.design_step = 0.0005;
  } else if (environment == "toy") {
    c.deps.design_step = c.deps.policy_step = 0.01;
    c.deps.iterations = 500;
    c.jodc.policy_step = 0.01;
    c.jodc.design_step = 0.01;
  } else {
    throw ConfigError("unknown environment '" + environment +
                      "' (expected msd, microgrid, drone or toy)");
  }
  c.jodc.batch = c.deps.batch;
  c.jodc.iterations = c.deps.iterations;
  c.jodc.eval_samples = c.deps.eval_samples;
  c.jodc.eval_every = c.deps.eval_every;
  return c;
}

// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& text, const std::string& where) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(where + ": bad number '" + text + "'");
  return v;
}

std::uint64_t parse_unsigned(const std::string& text, const std::string& where) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(where + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

std::size_t parse_size(const std::string& text, const std::string& where) {
  return static_cast<std::size_t>(parse_unsigned(text, where));
}

bool parse_bool(const std::string& text, const std::string& where) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError(where + ": expected true or false, got '" + text + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;
using KeyTable = std::map<std::string, Setter>;

const std::map<std::string, KeyTable>& key_tables() {
  static const std::map<std::string, KeyTable> tables = {
      {"train",
       {
           {"algo", [](auto& c, auto& v, auto&) { c.algorithm = v; }},
           {"env", [](auto&, auto&, auto&) {}},  // consumed by resolve()
           {"batch",
            [](auto& c, auto& v, auto& w) { c.deps.batch = c.jodc.batch = parse_size(v, w); }},
           {"iterations",
            [](auto& c, auto& v, auto& w) {
              c.deps.iterations = c.jodc.iterations = parse_size(v, w);
            }},
           {"design_step",
            [](auto& c, auto& v, auto& w) { c.deps.design_step = parse_double(v, w); }},
           {"policy_step",
            [](auto& c, auto& v, auto& w) { c.deps.policy_step = parse_double(v, w); }},
           {"eval_samples",
            [](auto& c, auto& v, auto& w) {
              c.deps.eval_samples = c.jodc.eval_samples = parse_size(v, w);
            }},
           {"eval_every",
            [](auto& c, auto& v, auto& w) {
              c.deps.eval_every = c.jodc.eval_every = parse_size(v, w);
            }},
           {"seeds", [](auto& c, auto& v, auto& w) { c.seeds = parse_seed_list(v, w); }},
           {"initial_design",
            [](auto& c, auto& v, auto& w) { c.deps.initial_design = parse_list(v, w); }},
       }},
      {"jodc",
       {
           {"design_step",
            [](auto& c, auto& v, auto& w) { c.jodc.design_step = parse_double(v, w); }},
           {"policy_step",
            [](auto& c, auto& v, auto& w) { c.jodc.policy_step = parse_double(v, w); }},
           {"ppo_epochs", [](auto& c, auto& v, auto& w) { c.jodc.ppo_epochs = parse_size(v, w); }},
           {"ppo_clip", [](auto& c, auto& v, auto& w) { c.jodc.ppo_clip = parse_double(v, w); }},
           {"design_baseline",
            [](auto& c, auto& v, auto& w) { c.jodc.design_baseline = parse_bool(v, w); }},
           {"initial_std_fraction",
            [](auto& c, auto& v, auto& w) { c.jodc.initial_std_fraction = parse_double(v, w); }},
           {"prefit_iterations",
            [](auto& c, auto& v, auto& w) { c.jodc.prefit_iterations = parse_size(v, w); }},
           {"condition_on_design",
            [](auto& c, auto& v, auto& w) { c.jodc.condition_on_design = parse_bool(v, w); }},
       }},
      {"anneal",
       {
           {"initial_temperature",
            [](auto& c, auto& v, auto& w) { c.anneal.initial_temperature = parse_double(v, w); }},
           {"visit", [](auto& c, auto& v, auto& w) { c.anneal.visit = parse_double(v, w); }},
           {"accept", [](auto& c, auto& v, auto& w) { c.anneal.accept = parse_double(v, w); }},
           {"max_evaluations",
            [](auto& c, auto& v, auto& w) { c.anneal.max_evaluations = parse_size(v, w); }},
           {"max_iterations",
            [](auto& c, auto& v, auto& w) { c.anneal.max_iterations = parse_size(v, w); }},
           {"restart_ratio",
            [](auto& c, auto& v, auto& w) { c.anneal.restart_ratio = parse_double(v, w); }},
           {"samples", [](auto& c, auto& v, auto& w) { c.anneal.samples = parse_size(v, w); }},
       }},
      {"rade",
       {
           {"components", [](auto& c, auto& v, auto&) { c.rade.components = split_list(v); }},
           {"origin", [](auto& c, auto& v, auto& w) { c.rade.origin = parse_list(v, w); }},
           {"step", [](auto& c, auto& v, auto& w) { c.rade.step = parse_list(v, w); }},
           {"count",
            [](auto& c, auto& v, auto& w) {
              c.rade.count.clear();
              for (const auto& p : split_list(v)) c.rade.count.push_back(parse_size(p, w));
            }},
           {"base", [](auto& c, auto& v, auto& w) { c.rade.base = parse_list(v, w); }},
           {"iterations", [](auto& c, auto& v, auto& w) { c.rade.iterations = parse_size(v, w); }},
       }},
  };
  return tables;
}

}  // namespace

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::string cell;
  std::istringstream s(text);
  while (std::getline(s, cell, ',')) parts.push_back(trim(cell));
  return parts;
}

std::vector<double> parse_list(const std::string& text, const std::string& where) {
  std::vector<double> values;
  for (const auto& p : split_list(text)) values.push_back(parse_double(p, where));
  if (values.empty()) throw ConfigError(where + ": empty list");
  return values;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text, const std::string& where) {
  std::vector<std::uint64_t> seeds;
  for (const auto& p : split_list(text)) seeds.push_back(parse_unsigned(p, where));
  if (seeds.empty()) throw ConfigError(where + ": empty seed list");
  return seeds;
}

Ini parse_ini(const std::string& text, const std::string& source) {
  Ini ini;
  std::string section = "train";
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto comment = raw.find_first_of("#;");
    const std::string line = trim(comment == std::string::npos ? raw : raw.substr(0, comment));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!key_tables().contains(section)) {
        throw ConfigError(where + ": unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": missing key");
    if (!key_tables().at(section).contains(key)) {
      throw ConfigError(where + ": unknown key '" + key + "' in [" + section + "]");
    }
    if (ini[section].contains(key)) {
      throw ConfigError(where + ": '" + key + "' set twice in [" + section + "]");
    }
    ini[section][key] = {value, line_no};
  }
  return ini;
}

Ini read_ini(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_ini(text.str(), path);
}

ExperimentConfig resolve(const Ini& ini, const std::string& source,
                         const std::optional<std::string>& environment) {
  // The flag wins over the file, which wins over msd.
  std::string env_name = "msd";
  if (environment) {
    env_name = *environment;
  } else if (const auto s = ini.find("train"); s != ini.end() && s->second.contains("env")) {
    env_name = s->second.at("env").value;
  }
  ExperimentConfig config = defaults_for(env_name);
  for (const auto& [section, entries] : ini) {
    const KeyTable& table = key_tables().at(section);
    for (const auto& [key, entry] : entries) {
      table.at(key)(config, entry.value, source + ":" + std::to_string(entry.line));
    }
  }
  return config;
}

std::vector<std::uint64_t> effective_seeds(const ExperimentConfig& config) {
  if (!config.seeds.empty()) return config.seeds;
  if (const auto seed = seed_from_environment()) return {*seed};
  std::vector<std::uint64_t> seeds(10);
  for (std::uint64_t i = 0; i < seeds.size(); ++i) seeds[i] = i;
  return seeds;
}

}  // namespace depslab::cli
