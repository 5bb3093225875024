// Two-step discrete environment small enough to enumerate: s0 = 0,
// a in {0, 1}, xi = +-1 with probability 1/2,
// s' = psi1 s + a + 0.1 xi, r = -(s - 1)^2 - 0.01 psi2^2.
#pragma once

#include "depslab/environment.hpp"

namespace depslab::env {

class Toy final : public Environment {
 public:
  Toy();

  const Descriptor& descriptor() const override { return descriptor_; }

  Matrix sample_initial_noise(std::size_t batch, Rng& rng) const override;
  State initial_state(ad::Tape& tape, Design design, const Matrix& noise) const override;
  Matrix sample_disturbance(const State& state, const Matrix& action, Rng& rng) const override;
  ad::Var disturbance_log_density(ad::Tape& tape, const State& state, const Matrix& action,
                                  const Matrix& xi) const override;
  State transition(ad::Tape& tape, const State& state, const Matrix& action, const Matrix& xi,
                   Design design) const override;
  ad::Var reward(ad::Tape& tape, const State& state, const Matrix& action, const Matrix& xi,
                 Design design) const override;

 private:
  Descriptor descriptor_;
};

}  // namespace depslab::env
