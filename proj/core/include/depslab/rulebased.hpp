// Hand-written policies with no learnable parameters. They read the design
// from StepInput and ignore theta; log_prob is a constant node.
#pragma once

#include <memory>
#include <string>

#include "depslab/policy.hpp"

namespace depslab::policy {

// Two-point categorical with expectation a_eq = omega^2 x_ref, a_eq first
// clamped into [min A, max A].
class MsdBracketing final : public Policy {
 public:
  MsdBracketing(std::vector<double> actions, double x_ref);

  std::string architecture() const override { return "rule msd1"; }
  std::size_t parameter_count() const override { return 0; }
  std::vector<double> initial_parameters(Rng&) const override { return {}; }
  ActionDraw sample(ad::Tape& tape, ad::Var theta, const StepInput& in,
                    Rng& rng) const override;
  ad::Var log_prob(ad::Tape& tape, ad::Var theta, const StepInput& in,
                   const Matrix& raw) const override;
  Matrix action_of(const Matrix& raw) const override;

  struct Bracket {
    std::size_t lower;
    std::size_t upper;
    double p_upper;
  };
  Bracket bracket(double omega) const;

 private:
  std::vector<double> actions_;  // sorted ascending
  double x_ref_;
};

// Pull back with -0.3 once the mass passes x_ref, otherwise let it move.
class MsdCounterSpring final : public Policy {
 public:
  MsdCounterSpring(std::vector<double> actions, double x_ref, double pull = -0.3);

  std::string architecture() const override { return "rule msd2"; }
  std::size_t parameter_count() const override { return 0; }
  std::vector<double> initial_parameters(Rng&) const override { return {}; }
  ActionDraw sample(ad::Tape& tape, ad::Var theta, const StepInput& in,
                    Rng& rng) const override;
  ad::Var log_prob(ad::Tape& tape, ad::Var theta, const StepInput& in,
                   const Matrix& raw) const override;
  Matrix action_of(const Matrix& raw) const override;

 private:
  std::vector<double> actions_;
  double x_ref_;
  std::size_t pull_index_;
  std::size_t rest_index_;
};

// Microgrid dispatch rules. Greedy uses PV, then battery, then genset;
// FullGenset runs the genset at C^G and balances with the battery.
class MicrogridRule final : public Policy {
 public:
  enum class Kind { kGreedy, kFullGenset };
  explicit MicrogridRule(Kind kind) : kind_(kind) {}

  std::string architecture() const override {
    return kind_ == Kind::kGreedy ? "rule mg1" : "rule mg2";
  }
  std::size_t parameter_count() const override { return 0; }
  std::vector<double> initial_parameters(Rng&) const override { return {}; }
  ActionDraw sample(ad::Tape& tape, ad::Var theta, const StepInput& in,
                    Rng& rng) const override;
  ad::Var log_prob(ad::Tape& tape, ad::Var theta, const StepInput& in,
                   const Matrix& raw) const override;
  Matrix action_of(const Matrix& raw) const override { return raw; }

  // (battery request, genset request) for one history.
  std::pair<double, double> decide(double soc, double load_mean, double pv_mean,
                                   double battery_capacity, double genset_capacity) const;

 private:
  Kind kind_;
};

// "msd1", "msd2", "mg1" or "mg2" for a matching environment. Throws
// std::invalid_argument otherwise (the drone has no rule-based policy).
std::unique_ptr<Policy> make_rule_policy(const env::Environment& environment, int variant);

}  // namespace depslab::policy
