// REINFORCE on a grid of designs: a policy is trained from scratch in every
// cell of a two-component design grid, the rest of psi held fixed.
#pragma once

#include <functional>
#include <vector>

#include "depslab/environment.hpp"
#include "depslab/policy.hpp"
#include "depslab/train.hpp"

namespace depslab::algo {

// Values origin + k * step for k = 1..count.
struct GridAxis {
  std::size_t component = 0;
  double origin = 0.0;
  double step = 0.0;
  std::size_t count = 0;

  std::vector<double> values() const;
};

struct RadeCell {
  std::vector<double> design;
  // Evaluation of the policy trained in this cell, after its last update.
  metrics::ReturnStats stats;
};

struct RadeResult {
  std::vector<RadeCell> cells;  // first axis outer, second inner
  std::size_t best = 0;         // index of the highest mean return
};

using CellCallback = std::function<void(const RadeCell&)>;

// Each cell runs reinforce_train at base with the two grid components
// replaced; base must lie in Psi and so must every grid value.
RadeResult rade(const env::Environment& environment, const policy::Policy& policy,
                std::vector<double> base, const GridAxis& first, const GridAxis& second,
                const DepsConfig& settings, const CellCallback& on_cell = {});

}  // namespace depslab::algo
