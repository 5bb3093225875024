// Differentiable environments. All methods work on a batch: every state
// variable is a (1 x M) tape node with one history per column, and actions
// and disturbances are (dim x M) plain matrices. Design components are (1 x 1)
// nodes shared by the batch, or (1 x M) when each history has its own design.
#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "depslab/autodiff.hpp"
#include "depslab/matrix.hpp"
#include "depslab/random.hpp"

namespace depslab::env {

struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t size() const { return lower.size(); }
  bool contains(std::span<const double> x) const;
  // Componentwise clamp, the Euclidean projection onto the box.
  std::vector<double> project(std::span<const double> x) const;
};

struct ActionSpace {
  std::size_t dim = 1;
  // Non-empty for a finite action set (then dim == 1).
  std::vector<double> values;
  // Box for continuous actions.
  std::vector<double> lower;
  std::vector<double> upper;

  bool discrete() const { return !values.empty(); }
};

struct Descriptor {
  std::string name;
  std::vector<std::string> state_names;
  ActionSpace actions;
  std::size_t disturbance_dim = 0;
  std::vector<std::string> design_names;
  Box design_space;
  // The optimizer moves psi / design_scale.
  std::vector<double> design_scale;
  int horizon = 0;
  // Reported reward = (raw + reward_offset) / reward_divisor.
  double reward_offset = 0.0;
  double reward_divisor = 1.0;

  std::size_t state_dim() const { return state_names.size(); }
  std::size_t design_dim() const { return design_names.size(); }
};

using State = std::vector<ad::Var>;
using Design = std::span<const ad::Var>;

class Environment {
 public:
  virtual ~Environment() = default;

  virtual const Descriptor& descriptor() const = 0;

  // Random draws behind the initial state, one column per history. May have
  // zero rows when the initial state is deterministic.
  virtual Matrix sample_initial_noise(std::size_t batch, Rng& rng) const = 0;
  virtual State initial_state(ad::Tape& tape, Design design, const Matrix& noise) const = 0;

  virtual Matrix sample_disturbance(const State& state, const Matrix& action,
                                    Rng& rng) const = 0;
  // log P_xi(xi | s, a), one entry per column.
  virtual ad::Var disturbance_log_density(ad::Tape& tape, const State& state,
                                          const Matrix& action, const Matrix& xi) const = 0;

  virtual State transition(ad::Tape& tape, const State& state, const Matrix& action,
                           const Matrix& xi, Design design) const = 0;
  // Reward as reported (after reward scaling), one entry per column.
  virtual ad::Var reward(ad::Tape& tape, const State& state, const Matrix& action,
                         const Matrix& xi, Design design) const = 0;

  // Offset added to a Gaussian policy's mean, one node per action dimension.
  // Empty when the environment asks for none.
  virtual std::vector<ad::Var> policy_mean_shift(ad::Tape& tape, Design design) const;
};

// "msd", "microgrid", "drone" or "toy". Throws std::invalid_argument.
std::unique_ptr<Environment> make_environment(const std::string& name);

// Builds design nodes for a single design vector.
std::vector<ad::Var> design_leaves(ad::Tape& tape, std::span<const double> psi,
                                   bool requires_grad);

// Number of columns of a node, treating a (1 x 1) node as broadcastable.
std::size_t batch_of(const State& state);

}  // namespace depslab::env
