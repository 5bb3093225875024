// Return estimation, dispersion statistics and run serialization.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "depslab/environment.hpp"
#include "depslab/policy.hpp"

namespace depslab::metrics {

// sigma- = sqrt(mean(min(x - mu, 0)^2)), sigma+ likewise with max; both
// divide by N, so sigma-^2 + sigma+^2 is the population variance.
struct PartialMoments {
  double lower = 0.0;
  double upper = 0.0;
};
PartialMoments partial_moments(std::span<const double> samples);

struct ReturnStats {
  double mean = 0.0;
  double sigma_minus = 0.0;
  double sigma_plus = 0.0;
};
ReturnStats summarize(std::span<const double> samples);

// Mean of n i.i.d. history returns, no graph kept.
ReturnStats expected_return(const env::Environment& environment, std::span<const double> design,
                            const policy::Policy& policy, std::span<const double> theta,
                            std::size_t n, Rng& rng);

struct RunRow {
  std::size_t iteration = 0;
  ReturnStats stats;
  std::vector<double> design;
};

struct RunRecord {
  std::vector<std::string> design_names;
  std::vector<RunRow> rows;
};

// printf %.9g.
std::string format_number(double value);
std::string csv_header(const std::vector<std::string>& design_names);
std::string csv_line(const RunRow& row);

// iter,return_mean,sigma_minus,sigma_plus,psi_<name>... with LF line ends.
void write_run_csv(const RunRecord& record, const std::string& path);
RunRecord read_run_csv(const std::string& path);

// Learning curves of several algorithms. Runs of one series are averaged per
// iteration; with two or more runs the band is the partial moments across
// runs, with one run it is the run's own columns. Runs are cut to their
// common iterations.
struct Series {
  std::string label;
  std::vector<RunRecord> runs;
};
struct CurvePoint {
  double iteration;
  double mean;
  double lower;  // mean - sigma-
  double upper;  // mean + sigma+
};
std::vector<CurvePoint> aggregate(const Series& series, bool* truncated = nullptr);
void write_learning_curve_svg(const std::vector<Series>& series, const std::string& path,
                              const std::string& title = "", bool* truncated = nullptr);

}  // namespace depslab::metrics
