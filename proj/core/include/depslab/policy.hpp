// Stochastic policies pi_theta(a | s, t). Parameters live in one flat vector
// theta, put on the tape as a single (P x 1) leaf.
//
// A policy sees the batch state (one history per column) plus the step index,
// and returns sampled actions together with their log-probability node. The
// raw draw is kept so the same log-probability can be rebuilt later under
// different parameters (PPO) or on a replayed rollout.
#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "depslab/autodiff.hpp"
#include "depslab/environment.hpp"
#include "depslab/matrix.hpp"
#include "depslab/random.hpp"

namespace depslab::policy {

// Input scaling (input - mean) / std over (state..., t).
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t size() const { return mean.size(); }
  std::vector<double> normalize(std::span<const double> x) const;
  std::vector<double> denormalize(std::span<const double> z) const;
};

struct StepInput {
  const env::State& state;
  int t = 0;
  env::Design design;
  // Added to the Gaussian mean, one node per action dimension; may be empty.
  std::span<const ad::Var> mean_shift;
};

struct ActionDraw {
  Matrix action;     // what the environment receives, (dim x M)
  Matrix raw;        // category index or unclipped Gaussian sample
  ad::Var log_prob;  // (1 x M)
};

class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string architecture() const = 0;
  virtual std::size_t parameter_count() const = 0;
  virtual std::vector<double> initial_parameters(Rng& rng) const = 0;

  // theta is the (P x 1) parameter node; ignored by parameter-free policies.
  virtual ActionDraw sample(ad::Tape& tape, ad::Var theta, const StepInput& in,
                            Rng& rng) const = 0;
  // log pi(raw | s, t) rebuilt for a given raw draw.
  virtual ad::Var log_prob(ad::Tape& tape, ad::Var theta, const StepInput& in,
                           const Matrix& raw) const = 0;
  // Action the environment receives for a raw draw.
  virtual Matrix action_of(const Matrix& raw) const = 0;

  virtual const Normalizer* normalizer() const { return nullptr; }
};

// One hidden tanh layer over (state..., t), or over (state..., t, design...)
// when inputs counts the design too. theta holds W1 (H x in), b1 (H), W2 (out x H), b2
// (out), each row-major.
class Mlp {
 public:
  Mlp(std::size_t inputs, std::size_t hidden, std::size_t outputs, Normalizer normalizer,
      double last_layer_shrink = 1.0);

  std::size_t inputs() const { return inputs_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t outputs() const { return outputs_; }
  std::size_t parameter_count() const;
  const Normalizer& normalizer() const { return normalizer_; }

  // Fan-in uniform weights, zero biases, last layer divided by the shrink.
  std::vector<double> initial_parameters(Rng& rng) const;
  // (outputs x M) raw outputs.
  ad::Var forward(ad::Tape& tape, ad::Var theta, const StepInput& in) const;

 private:
  std::size_t inputs_;
  std::size_t hidden_;
  std::size_t outputs_;
  Normalizer normalizer_;
  double shrink_;
};

class CategoricalMlp final : public Policy {
 public:
  CategoricalMlp(std::vector<double> actions, Normalizer normalizer, std::size_t hidden = 64);

  std::string architecture() const override;
  std::size_t parameter_count() const override { return mlp_.parameter_count(); }
  std::vector<double> initial_parameters(Rng& rng) const override {
    return mlp_.initial_parameters(rng);
  }
  ActionDraw sample(ad::Tape& tape, ad::Var theta, const StepInput& in,
                    Rng& rng) const override;
  ad::Var log_prob(ad::Tape& tape, ad::Var theta, const StepInput& in,
                   const Matrix& raw) const override;
  Matrix action_of(const Matrix& raw) const override;
  const Normalizer* normalizer() const override { return &mlp_.normalizer(); }

  const Mlp& mlp() const { return mlp_; }
  const std::vector<double>& actions() const { return actions_; }
  // Softmax probabilities, (|A| x M).
  Matrix probabilities(ad::Tape& tape, ad::Var theta, const StepInput& in) const;

 private:
  std::vector<double> actions_;
  Mlp mlp_;
};

// Diagonal Gaussian. The first dim outputs are the mean (plus the mean
// shift), the next dim give the variance as output^2 + variance_floor.
// Samples are clipped into [lower, upper]; the log-density is taken at the
// unclipped sample.
class GaussianMlp final : public Policy {
 public:
  static constexpr double kVarianceFloor = 1e-6;

  GaussianMlp(std::vector<double> lower, std::vector<double> upper, Normalizer normalizer,
              double last_layer_shrink = 1.0, std::size_t hidden = 64);

  std::string architecture() const override;
  std::size_t parameter_count() const override { return mlp_.parameter_count(); }
  std::vector<double> initial_parameters(Rng& rng) const override {
    return mlp_.initial_parameters(rng);
  }
  ActionDraw sample(ad::Tape& tape, ad::Var theta, const StepInput& in,
                    Rng& rng) const override;
  ad::Var log_prob(ad::Tape& tape, ad::Var theta, const StepInput& in,
                   const Matrix& raw) const override;
  Matrix action_of(const Matrix& raw) const override;
  const Normalizer* normalizer() const override { return &mlp_.normalizer(); }

  const Mlp& mlp() const { return mlp_; }
  std::size_t dim() const { return lower_.size(); }

  struct Moments {
    ad::Var mean;  // (dim x M)
    ad::Var std;   // (dim x M)
  };
  Moments moments(ad::Tape& tape, ad::Var theta, const StepInput& in) const;

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
  Mlp mlp_;
};

// Softmax table over a finite set of (t, s) contexts, for environments small
// enough to enumerate. Context of column m is the anchor of step t nearest to
// its scalar state. theta is the (|A| x K) logit table.
class TabularSoftmax final : public Policy {
 public:
  TabularSoftmax(std::vector<double> actions, std::vector<std::vector<double>> anchors);

  std::string architecture() const override;
  std::size_t parameter_count() const override;
  std::vector<double> initial_parameters(Rng& rng) const override;
  ActionDraw sample(ad::Tape& tape, ad::Var theta, const StepInput& in,
                    Rng& rng) const override;
  ad::Var log_prob(ad::Tape& tape, ad::Var theta, const StepInput& in,
                   const Matrix& raw) const override;
  Matrix action_of(const Matrix& raw) const override;

  std::size_t contexts() const { return context_count_; }
  std::size_t context(int t, double s) const;

 private:
  ad::Var logits(ad::Tape& tape, ad::Var theta, const StepInput& in) const;

  std::vector<double> actions_;
  std::vector<std::vector<double>> anchors_;
  std::vector<std::size_t> first_context_;
  std::size_t context_count_ = 0;
};

// Default learnable policy for an environment, with the input normalizer,
// output shift and initialization each environment asks for. A conditioned
// policy also reads the design components after (state..., t).
std::unique_ptr<Policy> make_policy(const env::Environment& environment,
                                    bool condition_on_design = false);

// The toy environment's contexts: s0 = 0, s1 in {-0.1, 0.1, 0.9, 1.1}.
std::unique_ptr<TabularSoftmax> make_toy_policy();

struct Checkpoint {
  std::string architecture;
  Normalizer normalizer;
  std::vector<double> theta;
};

// Text header (architecture, normalizer, count) followed by little-endian
// IEEE-754 doubles.
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace depslab::policy
