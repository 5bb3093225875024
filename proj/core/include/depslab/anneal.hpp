// Generalized simulated annealing (the global phase of dual annealing, without
// local search) and the rule-based design search built on it.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "depslab/environment.hpp"
#include "depslab/metrics.hpp"
#include "depslab/random.hpp"

namespace depslab::algo {

struct AnnealConfig {
  double initial_temperature = 5230.0;
  double visit = 2.62;    // q_v, shape of the visiting distribution
  double accept = -5.0;   // q_a, shape of the acceptance rule
  std::size_t max_evaluations = 2000;
  std::size_t max_iterations = 1000;
  // The search restarts from a random point when T / T0 drops below this.
  double restart_ratio = 2e-5;
  // Histories per Monte-Carlo estimate of the objective.
  std::size_t samples = 64;
  std::uint64_t seed = 0;
};

struct AnnealEvaluation {
  std::size_t index = 0;
  std::vector<double> point;
  double value = 0.0;
};

struct AnnealResult {
  std::vector<double> best;
  double best_value = 0.0;
  // Every objective call in order.
  std::vector<AnnealEvaluation> trace;
};

// Temperature of iteration i: T0 (2^(qv-1) - 1) / ((i + 2)^(qv-1) - 1).
double anneal_temperature(double initial, double visit, std::size_t iteration);

// Maximizes objective over the box. The search walks the unit cube and maps
// each candidate onto the box, wrapping out-of-range visits around as a torus.
using Objective = std::function<double(std::span<const double>)>;
AnnealResult dual_anneal(const Objective& objective, const env::Box& box,
                         const AnnealConfig& config, Rng& rng);

struct RulebasedResult {
  AnnealResult search;
  // Fresh evaluation of the best design.
  metrics::RunRow final;
};

// Dual annealing over Psi of the Monte-Carlo return of a fixed rule-based
// policy. Evaluation e uses the stream (seed, e, anneal); the search itself
// draws from (seed, 0, init) and the final evaluation from (seed, 0, eval).
RulebasedResult rulebased_optimize(const env::Environment& environment, int variant,
                                   const AnnealConfig& config);

}  // namespace depslab::algo
