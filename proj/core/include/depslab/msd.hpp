// Mass-spring-damper: x'' + 2 zeta omega x' + omega^2 x = a + xi, stepped with
// the closed-form solution over dt. Design psi = (omega, zeta, phi0, phi1, phi2);
// the phi components only enter the reward.
#pragma once

#include <array>
#include <utility>

#include "depslab/environment.hpp"

namespace depslab::env {

struct MsdConstants {
  double x0_lo = 0.198;
  double x0_hi = 0.202;
  double v0_lo = -0.01;
  double v0_hi = 0.01;
  double x_ref = 0.2;
  double c_omega = 0.5;
  double c_zeta = 0.5;
  std::array<double, 3> c_phi = {0.5, -0.3, 0.2};
  int horizon = 100;
  double dt = 0.05;
  std::array<double, 5> actions = {-0.3, -0.1, 0.0, 0.1, 0.3};
  double std_floor = 1e-6;
  // |zeta - 1| at or below this uses the critically damped formula.
  double critical_tolerance = 1e-9;
};

class MassSpringDamper final : public Environment {
 public:
  explicit MassSpringDamper(MsdConstants constants = {});

  const Descriptor& descriptor() const override { return descriptor_; }
  const MsdConstants& constants() const { return constants_; }

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
  MsdConstants constants_;
  Descriptor descriptor_;
};

// Closed-form (x, v) after tau seconds under constant force u. Plain double
// version of the transition, used by the rule-based evaluators and tests.
std::pair<double, double> msd_solution(double x, double v, double u, double omega, double zeta,
                                       double tau, double critical_tolerance = 1e-9);

}  // namespace depslab::env
