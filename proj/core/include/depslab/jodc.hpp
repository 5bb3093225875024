// Joint optimization of design and control: a Gaussian distribution over
// scaled designs trained by the log-derivative trick, and the control policy
// trained by PPO on the histories rolled out in the sampled designs.
#pragma once

#include <cstdint>
#include <vector>

#include "depslab/environment.hpp"
#include "depslab/metrics.hpp"
#include "depslab/optim.hpp"
#include "depslab/policy.hpp"
#include "depslab/rollout.hpp"
#include "depslab/train.hpp"

namespace depslab::algo {

struct JodcConfig {
  std::size_t batch = 64;
  std::size_t iterations = 1000;
  double design_step = 0.005;
  double policy_step = 0.001;
  std::size_t ppo_epochs = 5;
  double ppo_clip = 0.1;
  // Subtract the batch-mean return in the design-distribution loss.
  bool design_baseline = true;
  // Initial std of the design distribution as a fraction of each Psi range.
  double initial_std_fraction = 0.25;
  // PPO iterations on uniformly drawn designs before joint training.
  std::size_t prefit_iterations = 0;
  // The policy also reads the design. Callers build the policy accordingly
  // (policy::make_policy's second argument); jodc_train checks the match.
  bool condition_on_design = false;
  std::size_t eval_samples = 64;
  std::size_t eval_every = 1;
  std::uint64_t seed = 0;
};

// p_phi over z = psi / scale, independent normals with
// std = exp(log_std) + floor. Sampled designs are clipped into Psi; the
// density is taken at the unclipped z.
struct DesignDistribution {
  std::vector<double> mean;     // scaled units
  std::vector<double> log_std;  // scaled units
  std::vector<double> floor;    // 1e-6 of each Psi range, scaled units

  // Mean at a uniform draw in Psi, std at std_fraction of each range.
  static DesignDistribution initial(const env::Descriptor& d, double std_fraction, Rng& rng);

  std::vector<double> std() const;
  // Point design used for evaluation: clip(mean * scale).
  std::vector<double> mode(const env::Descriptor& d) const;
  // M draws; z is (d x M) in scaled units, designs the clipped psi values.
  struct Draw {
    Matrix z;
    Matrix designs;
  };
  Draw sample(const env::Descriptor& d, std::size_t m, Rng& rng) const;
  // sum_i log N(z_i; mean_i, std_i^2) for one column.
  double log_density(const Matrix& z, std::size_t column) const;
  // Gradient of -(1/M) sum_m log p(z_m) * weight_m with respect to
  // (mean, log_std), concatenated.
  std::vector<double> loss_gradient(const Matrix& z, std::span<const double> weight) const;
};

struct JodcResult {
  DesignDistribution distribution;
  std::vector<double> theta;
  std::vector<metrics::RunRow> curve;
  metrics::RunRow final;
};

JodcResult jodc_train(const env::Environment& environment, const policy::Policy& policy,
                      const JodcConfig& config, const RowCallback& on_row = {});

// Clipped PPO surrogate over the batch, per step:
//   L = -(1/(M T)) sum_{m,t} min(r A_m, clip(r, 1 - eps, 1 + eps) A_m)
// with r = pi_theta(a | s) / pi_old(a | s) and A_m = R_m - mean(R). The batch
// must have been generated with keep_states. designs is (d x M).
ad::Var ppo_loss(ad::Tape& tape, const env::Environment& environment,
                 const policy::Policy& policy, const Matrix& designs, const HistoryBatch& batch,
                 ad::Var theta, double clip);

// `epochs` full-batch Adam steps on ppo_loss. Returns the last loss value.
double ppo_update(const env::Environment& environment, const policy::Policy& policy,
                  const Matrix& designs, const HistoryBatch& batch, std::vector<double>& theta,
                  Adam& optimizer, std::size_t epochs, double clip);

}  // namespace depslab::algo
