#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include "depslab/anneal.hpp"
#include "depslab/jodc.hpp"
#include "depslab/metrics.hpp"
#include "depslab/rade.hpp"
#include "depslab/rulebased.hpp"
#include "depslab/train.hpp"

namespace depslab::cli {

namespace fs = std::filesystem;

namespace {

// Runs body and maps exceptions to exit codes.
int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void validate(const ExperimentConfig& c, const env::Descriptor& d) {
  require(c.algorithm == "deps" || c.algorithm == "jodc" || c.algorithm == "reinforce",
          "unknown algorithm '" + c.algorithm + "' (expected deps, jodc or reinforce)");
  require(c.deps.batch >= 1, "batch must be at least 1");
  require(c.deps.iterations >= 1, "iterations must be at least 1");
  require(c.deps.eval_samples >= 1, "eval_samples must be at least 1");
  require(c.deps.design_step > 0 && c.deps.policy_step > 0, "step sizes must be positive");
  require(c.jodc.design_step > 0 && c.jodc.policy_step > 0, "jodc step sizes must be positive");
  require(c.jodc.ppo_epochs >= 1, "ppo_epochs must be at least 1");
  require(c.jodc.ppo_clip > 0, "ppo_clip must be positive");
  require(c.jodc.initial_std_fraction > 0, "initial_std_fraction must be positive");
  require(!(c.jodc.condition_on_design && d.name == "toy"),
          "condition_on_design is not available for the toy environment");
  require(c.anneal.initial_temperature > 0, "initial_temperature must be positive");
  require(c.anneal.visit > 1 && c.anneal.visit < 3, "visit must lie in (1, 3)");
  require(c.anneal.max_evaluations >= 1, "max_evaluations must be at least 1");
  require(c.anneal.samples >= 1, "anneal samples must be at least 1");
  if (c.deps.initial_design) {
    require(c.deps.initial_design->size() == d.design_dim(),
            "initial_design needs " + std::to_string(d.design_dim()) + " components");
    require(d.design_space.contains(*c.deps.initial_design), "initial_design lies outside Psi");
  }
}

std::string seed_file(const std::string& out, const std::string& stem, std::uint64_t seed,
                      const std::string& ext) {
  return (fs::path(out) / (stem + "_seed" + std::to_string(seed) + ext)).string();
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::vector<std::string> psi_columns(const env::Descriptor& d, const std::string& suffix = "") {
  std::vector<std::string> cols;
  for (const auto& n : d.design_names) cols.push_back("psi_" + n + suffix);
  return cols;
}

std::string join(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
  return s;
}

void write_summary(const fs::path& dir, const env::Descriptor& d,
                   const std::vector<std::uint64_t>& seeds,
                   const std::vector<metrics::RunRow>& finals) {
  {
    std::ofstream out = open_output(dir / "finals.csv");
    std::vector<std::string> head = {"seed", "iter", "return_mean", "sigma_minus", "sigma_plus"};
    for (const auto& c : psi_columns(d)) head.push_back(c);
    out << join(head) << '\n';
    for (std::size_t i = 0; i < finals.size(); ++i) {
      out << seeds[i] << ',' << metrics::csv_line(finals[i]) << '\n';
    }
  }
  // Final return averaged over seeds with partial moments across seeds, and
  // each design component's mean and standard deviation across seeds.
  std::vector<double> means;
  for (const auto& f : finals) means.push_back(f.stats.mean);
  const metrics::ReturnStats across = metrics::summarize(means);
  std::vector<std::string> head = {"runs", "return_mean", "sigma_minus", "sigma_plus"};
  std::vector<std::string> row = {std::to_string(finals.size()),
                                  metrics::format_number(across.mean),
                                  metrics::format_number(across.sigma_minus),
                                  metrics::format_number(across.sigma_plus)};
  for (std::size_t i = 0; i < d.design_dim(); ++i) {
    head.push_back("psi_" + d.design_names[i] + "_mean");
    head.push_back("psi_" + d.design_names[i] + "_std");
    double mean = 0.0;
    for (const auto& f : finals) mean += f.design[i];
    mean /= static_cast<double>(finals.size());
    double var = 0.0;
    for (const auto& f : finals) var += (f.design[i] - mean) * (f.design[i] - mean);
    var /= static_cast<double>(finals.size());
    row.push_back(metrics::format_number(mean));
    row.push_back(metrics::format_number(std::sqrt(var)));
  }
  std::ofstream out = open_output(dir / "summary.csv");
  out << join(head) << '\n' << join(row) << '\n';
}

}  // namespace

ExperimentConfig load_experiment(const CommonArgs& args) {
  Ini ini;
  std::string source = "<defaults>";
  if (args.config_file) {
    ini = read_ini(*args.config_file);
    source = *args.config_file;
  }
  ExperimentConfig config = resolve(ini, source, args.env);
  if (args.seed && args.seeds) throw ConfigError("--seed and --seeds are mutually exclusive");
  if (args.seed) config.seeds = {*args.seed};
  if (args.seeds) config.seeds = parse_seed_list(*args.seeds, "--seeds");
  return config;
}

int cmd_train(const TrainArgs& args) {
  return guarded([&] {
    ExperimentConfig config = load_experiment(args.common);
    if (args.algo) config.algorithm = *args.algo;
    if (args.iterations) config.deps.iterations = config.jodc.iterations = *args.iterations;
    if (args.batch) config.deps.batch = config.jodc.batch = *args.batch;
    const auto environment = env::make_environment(config.environment);
    const auto& d = environment->descriptor();
    validate(config, d);
    const bool jodc = config.algorithm == "jodc";
    const auto policy =
        policy::make_policy(*environment, jodc && config.jodc.condition_on_design);

    const fs::path dir(args.common.out);
    fs::create_directories(dir);
    const auto seeds = effective_seeds(config);
    std::vector<metrics::RunRow> finals;
    for (const std::uint64_t seed : seeds) {
      std::ofstream csv = open_output(seed_file(args.common.out, "run", seed, ".csv"));
      csv << metrics::csv_header(d.design_names) << '\n';
      // Flushed per row so long runs can be inspected while they train.
      auto on_row = [&](const metrics::RunRow& row) {
        csv << metrics::csv_line(row) << '\n';
        csv.flush();
      };
      std::vector<double> theta;
      if (jodc) {
        algo::JodcConfig jc = config.jodc;
        jc.seed = seed;
        const algo::JodcResult r = algo::jodc_train(*environment, *policy, jc, on_row);
        theta = r.theta;
        finals.push_back(r.final);
      } else {
        algo::DepsConfig dc = config.deps;
        dc.seed = seed;
        algo::TrainResult r;
        if (config.algorithm == "reinforce") {
          // Fixed design: the configured one, else a uniform draw in Psi.
          std::vector<double> psi;
          if (dc.initial_design) {
            psi = *dc.initial_design;
          } else {
            Rng init = make_rng(seed, 0, Purpose::kInit);
            psi = algo::random_design(d, init);
          }
          r = algo::reinforce_train(*environment, *policy, psi, dc, on_row);
        } else {
          r = algo::deps_train(*environment, *policy, dc, on_row);
        }
        theta = r.theta;
        finals.push_back(r.final);
      }
      if (!csv) throw std::runtime_error("failed writing the run CSV for seed " + std::to_string(seed));
      policy::Checkpoint ck{policy->architecture(),
                            policy->normalizer() ? *policy->normalizer() : policy::Normalizer{},
                            theta};
      policy::save_checkpoint(seed_file(args.common.out, "policy", seed, ".bin"), ck);
      std::cout << "seed " << seed << ": final return "
                << metrics::format_number(finals.back().stats.mean) << '\n';
    }
    write_summary(dir, d, seeds, finals);
    return 0;
  });
}

int cmd_rade(const RadeArgs& args) {
  return guarded([&] {
    ExperimentConfig config = load_experiment(args.common);
    auto& grid = config.rade;
    if (args.grid_dims) {
      grid.count.clear();
      for (double v : parse_list(*args.grid_dims, "--grid-dims")) {
        require(v >= 1 && v == std::floor(v), "--grid-dims takes positive integers");
        grid.count.push_back(static_cast<std::size_t>(v));
      }
    }
    if (args.grid_steps) grid.step = parse_list(*args.grid_steps, "--grid-steps");
    if (args.grid_origin) grid.origin = parse_list(*args.grid_origin, "--grid-origin");
    if (args.components) {
      grid.components = split_list(*args.components);
    }
    if (args.iterations) grid.iterations = *args.iterations;

    const auto environment = env::make_environment(config.environment);
    const auto& d = environment->descriptor();
    validate(config, d);
    require(grid.components.size() == 2 && grid.count.size() == 2 && grid.step.size() == 2 &&
                grid.origin.size() == 2,
            "the RADE grid needs exactly two components, dims, steps and origins");
    require(!grid.base.empty(), "no default base design for '" + d.name + "'; set [rade] base");
    require(grid.base.size() == d.design_dim(), "[rade] base has the wrong length");
    require(grid.iterations >= 1, "RADE iterations must be at least 1");
    algo::GridAxis axes[2];
    for (int a = 0; a < 2; ++a) {
      const auto it = std::find(d.design_names.begin(), d.design_names.end(), grid.components[a]);
      require(it != d.design_names.end(), "unknown design component '" + grid.components[a] + "'");
      axes[a] = {static_cast<std::size_t>(it - d.design_names.begin()), grid.origin[a],
                 grid.step[a], grid.count[a]};
    }
    env::Box box = d.design_space;
    for (const auto& axis : axes) {
      for (double v : axis.values()) {
        require(v >= box.lower[axis.component] && v <= box.upper[axis.component],
                "grid value " + metrics::format_number(v) + " lies outside Psi");
      }
    }

    const auto policy = policy::make_policy(*environment);
    algo::DepsConfig dc = config.deps;
    dc.iterations = grid.iterations;
    dc.seed = effective_seeds(config).front();

    const fs::path dir(args.common.out);
    fs::create_directories(dir);
    std::ofstream csv = open_output(dir / "rade.csv");
    csv << d.design_names[axes[0].component] << ',' << d.design_names[axes[1].component]
        << ",best_return\n";
    const auto result = algo::rade(*environment, *policy, grid.base, axes[0], axes[1], dc,
                                   [&](const algo::RadeCell& cell) {
                                     csv << metrics::format_number(cell.design[axes[0].component])
                                         << ','
                                         << metrics::format_number(cell.design[axes[1].component])
                                         << ',' << metrics::format_number(cell.stats.mean) << '\n';
                                     csv.flush();
                                   });
    const auto& best = result.cells[result.best];
    std::cout << "argmax " << d.design_names[axes[0].component] << '='
              << metrics::format_number(best.design[axes[0].component]) << ' '
              << d.design_names[axes[1].component] << '='
              << metrics::format_number(best.design[axes[1].component])
              << " return=" << metrics::format_number(best.stats.mean) << '\n';
    return 0;
  });
}

int cmd_rulebased(const RulebasedArgs& args) {
  return guarded([&] {
    ExperimentConfig config = load_experiment(args.common);
    if (args.budget) config.anneal.max_evaluations = *args.budget;
    const auto environment = env::make_environment(config.environment);
    const auto& d = environment->descriptor();
    require(d.name == "msd" || d.name == "microgrid",
            "rule-based design search is not supported for '" + d.name +
                "': no rule-based policy is defined for it");
    require(args.policy == 1 || args.policy == 2, "--policy must be 1 or 2");
    validate(config, d);

    algo::AnnealConfig ac = config.anneal;
    ac.seed = effective_seeds(config).front();
    const algo::RulebasedResult r = algo::rulebased_optimize(*environment, args.policy, ac);

    const fs::path dir(args.common.out);
    fs::create_directories(dir);
    {
      std::ofstream out = open_output(dir / "rulebased_trace.csv");
      std::vector<std::string> head = {"eval"};
      for (const auto& c : psi_columns(d)) head.push_back(c);
      head.push_back("return");
      out << join(head) << '\n';
      for (const auto& e : r.search.trace) {
        out << e.index;
        for (double p : e.point) out << ',' << metrics::format_number(p);
        out << ',' << metrics::format_number(e.value) << '\n';
      }
    }
    {
      std::ofstream out = open_output(dir / "rulebased_summary.csv");
      std::vector<std::string> head = {"policy", "evaluations", "return_mean", "sigma_minus",
                                       "sigma_plus"};
      for (const auto& c : psi_columns(d)) head.push_back(c);
      out << join(head) << '\n';
      out << d.name << args.policy << ',' << r.search.trace.size() << ','
          << metrics::format_number(r.final.stats.mean) << ','
          << metrics::format_number(r.final.stats.sigma_minus) << ','
          << metrics::format_number(r.final.stats.sigma_plus);
      for (double p : r.final.design) out << ',' << metrics::format_number(p);
      out << '\n';
    }
    std::cout << "best design return " << metrics::format_number(r.final.stats.mean) << " after "
              << r.search.trace.size() << " evaluations\n";
    return 0;
  });
}

int cmd_report(const ReportArgs& args) {
  return guarded([&] {
    require(!args.runs.empty(), "report needs at least one --runs entry");
    std::vector<metrics::Series> series;
    for (const auto& entry : args.runs) {
      const fs::path path(entry);
      require(fs::exists(path), "no such run directory or file: " + entry);
      metrics::Series s;
      if (fs::is_directory(path)) {
        s.label = path.filename().empty() ? path.parent_path().filename().string()
                                          : path.filename().string();
        std::vector<fs::path> files;
        for (const auto& f : fs::directory_iterator(path)) {
          const std::string name = f.path().filename().string();
          if (name.rfind("run_seed", 0) == 0 && f.path().extension() == ".csv") {
            files.push_back(f.path());
          }
        }
        std::sort(files.begin(), files.end());
        require(!files.empty(), "no run_seed*.csv files in " + entry);
        for (const auto& f : files) s.runs.push_back(metrics::read_run_csv(f.string()));
      } else {
        s.label = path.stem().string();
        s.runs.push_back(metrics::read_run_csv(path.string()));
      }
      series.push_back(std::move(s));
    }
    bool truncated = false;
    metrics::write_learning_curve_svg(series, args.out, args.title, &truncated);
    if (truncated) {
      std::cerr << "warning: runs of unequal length were cut to their common iterations\n";
    }
    return 0;
  });
}

}  // namespace depslab::cli
