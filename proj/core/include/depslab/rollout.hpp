// Batched history generation. A batch of M histories is simulated together,
// one history per column, on a single tape, so the returned nodes depend on
// the design leaves (through every state) and on theta (through log pi).
#pragma once

#include <span>
#include <vector>

#include "depslab/autodiff.hpp"
#include "depslab/environment.hpp"
#include "depslab/policy.hpp"

namespace depslab::algo {

// Every random draw behind a batch. Replaying it makes the loss a
// deterministic function of (psi, theta).
struct Frozen {
  Matrix initial_noise;
  std::vector<Matrix> raw_actions;   // per step
  std::vector<Matrix> disturbances;  // per step
};

struct HistoryBatch {
  Frozen draws;
  ad::Var log_policy;       // sum_t log pi(a_t | s_t, t), (1 x M)
  ad::Var log_disturbance;  // sum_t log P_xi(xi_t | s_t, a_t), (1 x M)
  ad::Var returns;          // sum_t r_t, (1 x M)
  std::vector<double> return_values;
  // Filled when states are kept: per step, the (d_S x M) state values and the
  // (1 x M) log pi values of the sampled actions.
  std::vector<Matrix> states;
  std::vector<Matrix> step_log_policy;
};

struct Rollout {
  const env::Environment& environment;
  const policy::Policy& policy;
  env::Design design;  // (1 x 1) shared or (1 x M) per-history nodes
  ad::Var theta;
};

HistoryBatch generate_histories(ad::Tape& tape, const Rollout& rollout, std::size_t batch,
                                Rng& rng, const Frozen* replay = nullptr,
                                bool keep_states = false);

// L = -(1/M) sum_m [(log pi_m + log P_m)(R_m - B) + R_m], B held constant.
ad::Var deps_loss(const HistoryBatch& batch, double baseline);

double mean_of(std::span<const double> values);

// Returns of n histories without keeping a graph: the tape is rebuilt every
// step. Draws come from rng in the same order as generate_histories.
std::vector<double> sample_returns(const env::Environment& environment,
                                   std::span<const double> design,
                                   const policy::Policy& policy,
                                   std::span<const double> theta, std::size_t n, Rng& rng);

// (1 x M) design nodes from a (d x M) matrix, one design per column.
std::vector<ad::Var> design_columns(ad::Tape& tape, const Matrix& designs, bool requires_grad);

// State values as a (d x M) matrix, broadcasting (1 x 1) entries.
Matrix snapshot(const env::State& state, std::size_t batch);
env::State state_leaves(ad::Tape& tape, const Matrix& values);

}  // namespace depslab::algo
