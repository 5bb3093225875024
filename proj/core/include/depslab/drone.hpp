// Quadrotor flying around an ellipse in the z = 0 plane. State
// (phi, theta, yaw, p, q, r, u, v, w, x, y, z), action = four propeller
// speeds, design psi = (D, R, H, W).
#pragma once

#include <array>

#include "depslab/environment.hpp"

namespace depslab::env {

struct DroneConstants {
  double rho_air = 1.225;
  double rho = 900.0;  // arm material density
  double c_thrust = 1.0;
  double c_drag = 1.0;
  double lambda = 0.3;
  double wind_mean = 0.0;
  double wind_std = 0.003;
  int euler_steps = 1;
  double dt = 0.07;
  double v_max = 1.0;
  double r_x = 1.0;
  double r_y = 1.5;
  double omega_min = 0.0;
  double omega_max = 20.0;
  double gravity = 9.81;
  int horizon = 100;
  double state_limit = 100.0;
  double gradient_cap = 1e11;
};

// Mass, inertia and rotor factors derived from psi.
template <class T>
struct DroneBody {
  T arm;  // L, barycenter to rotor center
  T mass;
  T inertia_x;
  T inertia_y;
  T inertia_z;
  T thrust;  // b
  T drag;    // d
  T hover_speed;  // omega_stat
};

DroneBody<double> drone_body(const DroneConstants& c, std::span<const double> psi);
DroneBody<ad::Var> drone_body(const DroneConstants& c, Design psi);

struct EllipsePoint {
  double x;
  double y;
  double angle;  // (x, y) = (r_x (1 + cos angle), r_y sin angle)
};

// Nearest point of the ellipse ((x - r_x)/r_x)^2 + (y/r_y)^2 = 1 to (x, y).
// Points on the line y = 0 project to (0, 0) or (2 r_x, 0) by the sign of
// x - r_x.
EllipsePoint ellipse_project(double x, double y, double r_x, double r_y);

class Drone final : public Environment {
 public:
  explicit Drone(DroneConstants constants = {});

  const Descriptor& descriptor() const override { return descriptor_; }
  const DroneConstants& constants() const { return constants_; }

  Matrix sample_initial_noise(std::size_t batch, Rng& rng) const override;
  State initial_state(ad::Tape& tape, Design design, const Matrix& noise) const override;
  Matrix sample_disturbance(const State& state, const Matrix& action, Rng& rng) const override;
  ad::Var disturbance_log_density(ad::Tape& tape, const State& state, const Matrix& action,
                                  const Matrix& xi) const override;
  State transition(ad::Tape& tape, const State& state, const Matrix& action, const Matrix& xi,
                   Design design) const override;
  ad::Var reward(ad::Tape& tape, const State& state, const Matrix& action, const Matrix& xi,
                 Design design) const override;
  std::vector<ad::Var> policy_mean_shift(ad::Tape& tape, Design design) const override;

 private:
  DroneConstants constants_;
  Descriptor descriptor_;
};

}  // namespace depslab::env
