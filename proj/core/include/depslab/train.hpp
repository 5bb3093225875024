// Projected stochastic gradient ascent on (psi, theta) with the DEPS loss,
// and REINFORCE as the special case where psi stays fixed.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "depslab/environment.hpp"
#include "depslab/metrics.hpp"
#include "depslab/policy.hpp"

namespace depslab::algo {

struct DepsConfig {
  std::size_t batch = 64;
  std::size_t iterations = 1000;
  double design_step = 0.005;
  double policy_step = 0.005;
  // false: psi is held at initial_design and only theta moves (REINFORCE).
  bool optimize_design = true;
  std::size_t eval_samples = 64;
  // Evaluate (psi_k, theta_k) when k % eval_every == 0; 0 disables the curve.
  std::size_t eval_every = 1;
  std::uint64_t seed = 0;
  // Drawn uniformly in Psi when absent.
  std::optional<std::vector<double>> initial_design;
  std::optional<std::vector<double>> initial_theta;
};

struct TrainResult {
  std::vector<double> design;
  std::vector<double> theta;
  std::vector<metrics::RunRow> curve;
  // Evaluation of the parameters returned, after the last update.
  metrics::RunRow final;
};

using RowCallback = std::function<void(const metrics::RunRow&)>;

TrainResult deps_train(const env::Environment& environment, const policy::Policy& policy,
                       const DepsConfig& config, const RowCallback& on_row = {});

// deps_train with optimize_design = false at the given design.
TrainResult reinforce_train(const env::Environment& environment, const policy::Policy& policy,
                            std::vector<double> design, DepsConfig config,
                            const RowCallback& on_row = {});

// Design drawn uniformly in Psi.
std::vector<double> random_design(const env::Descriptor& descriptor, Rng& rng);

}  // namespace depslab::algo
