#include "depslab/rade.hpp"

#include <stdexcept>

namespace depslab::algo {

std::vector<double> GridAxis::values() const {
  std::vector<double> v;
  for (std::size_t k = 1; k <= count; ++k) v.push_back(origin + static_cast<double>(k) * step);
  return v;
}

RadeResult rade(const env::Environment& environment, const policy::Policy& policy,
                std::vector<double> base, const GridAxis& first, const GridAxis& second,
                const DepsConfig& settings, const CellCallback& on_cell) {
  const auto& box = environment.descriptor().design_space;
  if (base.size() != box.size()) throw std::invalid_argument("rade: base design has wrong length");
  if (first.component >= base.size() || second.component >= base.size() ||
      first.component == second.component) {
    throw std::invalid_argument("rade: grid axes must name two distinct design components");
  }
  if (first.count == 0 || second.count == 0) throw std::invalid_argument("rade: empty grid");

  DepsConfig config = settings;
  config.eval_every = 0;
  RadeResult result;
  for (double a : first.values()) {
    for (double b : second.values()) {
      std::vector<double> psi = base;
      psi[first.component] = a;
      psi[second.component] = b;
      if (!box.contains(psi)) throw std::invalid_argument("rade: grid point outside Psi");
      const TrainResult run = reinforce_train(environment, policy, psi, config);
      result.cells.push_back({psi, run.final.stats});
      if (on_cell) on_cell(result.cells.back());
      if (result.cells.back().stats.mean > result.cells[result.best].stats.mean) {
        result.best = result.cells.size() - 1;
      }
    }
  }
  return result;
}

}  // namespace depslab::algo
