#include "depslab/environment.hpp"

#include <algorithm>
#include <stdexcept>

#include "depslab/drone.hpp"
#include "depslab/microgrid.hpp"
#include "depslab/msd.hpp"
#include "depslab/toy.hpp"

namespace depslab::env {

bool Box::contains(std::span<const double> x) const {
  if (x.size() != lower.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
  }
  return true;
}

std::vector<double> Box::project(std::span<const double> x) const {
  if (x.size() != lower.size()) throw std::invalid_argument("box: dimension mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::clamp(x[i], lower[i], upper[i]);
  return out;
}

std::vector<ad::Var> Environment::policy_mean_shift(ad::Tape&, Design) const { return {}; }

std::unique_ptr<Environment> make_environment(const std::string& name) {
  if (name == "msd") return std::make_unique<MassSpringDamper>();
  if (name == "microgrid") return std::make_unique<Microgrid>();
  if (name == "drone") return std::make_unique<Drone>();
  if (name == "toy") return std::make_unique<Toy>();
  throw std::invalid_argument("unknown environment '" + name +
                              "' (expected msd, microgrid, drone or toy)");
}

std::vector<ad::Var> design_leaves(ad::Tape& tape, std::span<const double> psi,
                                   bool requires_grad) {
  std::vector<ad::Var> out;
  out.reserve(psi.size());
  for (double p : psi) out.push_back(tape.leaf(Matrix(1, 1, p), requires_grad));
  return out;
}

std::size_t batch_of(const State& state) {
  std::size_t n = 1;
  for (const auto& v : state) n = std::max(n, v.cols());
  return n;
}

}  // namespace depslab::env
