#include "depslab/drone.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <tuple>

namespace depslab::env {

namespace {

// Shared by the double and tape versions so both round identically.
template <class T>
DroneBody<T> body_from(const DroneConstants& c, const T& d_tip, const T& radius, const T& height,
                       const T& width) {
  using std::sqrt;
  using ad::sqrt;
  const double rho = c.rho;
  T arm = d_tip + radius;
  T mass = 4.0 * rho * height * width * (arm - width / 2.0) + rho * height * width * width;
  T inertia_xy = rho * arm * height * (4.0 * arm * arm + height * height) / 6.0;
  T inertia_z =
      rho * width * (4.0 * arm * arm * arm + arm * width * width - width * width * width) / 3.0 +
      rho * width * width * width * width / 6.0;
  T disk = std::numbers::pi * radius * radius;
  T thrust = 0.5 * c.rho_air * c.c_thrust * disk * radius * radius;
  T drag = 0.5 * c.rho_air * c.c_drag * disk * radius * radius;
  T hover = sqrt(mass * c.gravity / (4.0 * thrust));
  return {arm, mass, inertia_xy, inertia_xy, inertia_z, thrust, drag, hover};
}

// Robust root of the distance equation for an axis-aligned ellipse with
// semi-axes e0 >= e1 and a query point (y0, y1) in the first quadrant,
// by bisection on the Lagrange multiplier.
std::pair<double, double> nearest_first_quadrant(double e0, double e1, double y0, double y1) {
  if (y1 > 0.0) {
    if (y0 > 0.0) {
      const double z0 = y0 / e0;
      const double z1 = y1 / e1;
      const double g = z0 * z0 + z1 * z1 - 1.0;
      if (g == 0.0) return {y0, y1};
      const double r0 = (e0 / e1) * (e0 / e1);
      const double n0 = r0 * z0;
      double s0 = z1 - 1.0;
      double s1 = g < 0.0 ? 0.0 : std::hypot(n0, z1) - 1.0;
      double s = 0.0;
      for (int i = 0; i < 2100; ++i) {
        s = 0.5 * (s0 + s1);
        if (s == s0 || s == s1) break;
        const double ratio0 = n0 / (s + r0);
        const double ratio1 = z1 / (s + 1.0);
        const double gs = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
        if (gs > 0.0) {
          s0 = s;
        } else if (gs < 0.0) {
          s1 = s;
        } else {
          break;
        }
      }
      return {r0 * y0 / (s + r0), y1 / (s + 1.0)};
    }
    return {0.0, e1};
  }
  const double numer = e0 * y0;
  const double denom = e0 * e0 - e1 * e1;
  if (numer < denom) {
    const double ratio = numer / denom;
    return {e0 * ratio, e1 * std::sqrt(1.0 - ratio * ratio)};
  }
  return {e0, 0.0};
}

}  // namespace

DroneBody<double> drone_body(const DroneConstants& c, std::span<const double> psi) {
  return body_from<double>(c, psi[0], psi[1], psi[2], psi[3]);
}

DroneBody<ad::Var> drone_body(const DroneConstants& c, Design psi) {
  return body_from<ad::Var>(c, psi[0], psi[1], psi[2], psi[3]);
}

EllipsePoint ellipse_project(double x, double y, double r_x, double r_y) {
  const double dx = x - r_x;
  if (y == 0.0) {
    return dx < 0.0 ? EllipsePoint{0.0, 0.0, std::numbers::pi} : EllipsePoint{2.0 * r_x, 0.0, 0.0};
  }
  // Work in the first quadrant with the larger semi-axis first.
  const double ax = std::fabs(dx);
  const double ay = std::fabs(y);
  double px = 0.0;
  double py = 0.0;
  if (r_x >= r_y) {
    std::tie(px, py) = nearest_first_quadrant(r_x, r_y, ax, ay);
  } else {
    std::tie(py, px) = nearest_first_quadrant(r_y, r_x, ay, ax);
  }
  const double ex = std::copysign(px, dx);
  const double ey = std::copysign(py, y);
  return {r_x + ex, ey, std::atan2(ey / r_y, ex / r_x)};
}

Drone::Drone(DroneConstants constants) : constants_(constants) {
  descriptor_.name = "drone";
  descriptor_.state_names = {"phi", "theta", "yaw", "p", "q", "r",
                             "u",   "v",     "w",   "x", "y", "z"};
  descriptor_.actions.dim = 4;
  descriptor_.actions.lower.assign(4, constants_.omega_min);
  descriptor_.actions.upper.assign(4, constants_.omega_max);
  descriptor_.disturbance_dim = 6;
  descriptor_.design_names = {"D", "R", "H", "W"};
  descriptor_.design_space = {{0.05, 0.01, 0.001, 0.001}, {0.2, 0.2, 0.01, 0.01}};
  descriptor_.design_scale = {0.2, 0.2, 0.01, 0.01};
  descriptor_.horizon = constants_.horizon;
}

Matrix Drone::sample_initial_noise(std::size_t batch, Rng&) const { return Matrix(0, batch); }

State Drone::initial_state(ad::Tape& tape, Design, const Matrix& noise) const {
  ad::Var zeros = tape.full(1, noise.cols, 0.0);
  return State(12, zeros);
}

Matrix Drone::sample_disturbance(const State&, const Matrix& action, Rng& rng) const {
  Matrix xi(6, action.cols, 0.0);
  for (std::size_t m = 0; m < action.cols; ++m) {
    for (std::size_t k = 0; k < 3; ++k) {
      xi(k, m) = constants_.wind_mean + constants_.wind_std * standard_normal(rng);
    }
  }
  return xi;
}

ad::Var Drone::disturbance_log_density(ad::Tape& tape, const State&, const Matrix&,
                                       const Matrix& xi) const {
  ad::Var forces =
      tape.leaf(std::span<const double>(xi.data.data(), 3 * xi.cols), 3, xi.cols, false);
  return ad::col_sum(ad::normal_log_density(forces, tape.constant(constants_.wind_mean),
                                            tape.constant(constants_.wind_std)));
}

State Drone::transition(ad::Tape& tape, const State& state, const Matrix& action,
                        const Matrix& xi, Design design) const {
  const auto& c = constants_;
  const std::size_t n = action.cols;
  Matrix total(1, n);
  Matrix roll(1, n);
  Matrix pitch(1, n);
  Matrix yaw(1, n);
  for (std::size_t m = 0; m < n; ++m) {
    double sq[4];
    for (std::size_t k = 0; k < 4; ++k) {
      const double w = std::clamp(action(k, m), c.omega_min, c.omega_max);
      sq[k] = w * w;
    }
    total(0, m) = (sq[0] + sq[1]) + (sq[2] + sq[3]);
    roll(0, m) = sq[2] - sq[0];
    pitch(0, m) = sq[3] - sq[1];
    yaw(0, m) = (sq[1] + sq[3]) - (sq[0] + sq[2]);
  }
  const DroneBody<ad::Var> body = drone_body(c, design);
  // f_tr / m written through the hover speed (b / m = g / (4 omega_stat^2)),
  // so hovering at omega_stat balances gravity exactly in floating point.
  ad::Var thrust_acc =
      c.gravity * (tape.constant(total) / (4.0 * ad::square(body.hover_speed)));
  ad::Var torque_x = body.thrust * body.arm * tape.constant(roll);
  ad::Var torque_y = body.thrust * body.arm * tape.constant(pitch);
  ad::Var torque_z = body.drag * tape.constant(yaw);
  ad::Var wind[6];
  for (std::size_t k = 0; k < 6; ++k) {
    wind[k] = tape.leaf(std::span<const double>(xi.data.data() + k * n, n), 1, n, false);
  }
  ad::Var ax = (torque_x + wind[3]) / body.inertia_x;
  ad::Var ay = (torque_y + wind[4]) / body.inertia_y;
  ad::Var az = (torque_z + wind[5]) / body.inertia_z;
  ad::Var kx = (body.inertia_y - body.inertia_z) / body.inertia_x;
  ad::Var ky = (body.inertia_z - body.inertia_x) / body.inertia_y;
  ad::Var kz = (body.inertia_x - body.inertia_y) / body.inertia_z;
  ad::Var fx = wind[0] / body.mass;
  ad::Var fy = wind[1] / body.mass;
  ad::Var fz = wind[2] / body.mass;

  const double h = c.dt / c.euler_steps;
  State s = state;
  for (int step = 0; step < c.euler_steps; ++step) {
    const ad::Var &phi = s[0], &th = s[1], &psi = s[2], &p = s[3], &q = s[4], &r = s[5];
    const ad::Var &u = s[6], &v = s[7], &w = s[8];
    for (double value : th.value()) {
      if (std::fabs(std::cos(value)) < 1e-6) {
        throw std::domain_error("drone: pitch at +-pi/2, attitude kinematics singular");
      }
    }
    ad::Var sphi = ad::sin(phi), cphi = ad::cos(phi);
    ad::Var sth = ad::sin(th), cth = ad::cos(th);
    ad::Var spsi = ad::sin(psi), cpsi = ad::cos(psi);
    ad::Var tth = sth / cth;

    State ds(12);
    ds[0] = p + sphi * tth * q + cphi * tth * r;
    ds[1] = cphi * q - sphi * r;
    ds[2] = sphi / cth * q + cphi / cth * r;
    ds[3] = kx * r * q + ax;
    ds[4] = ky * p * r + ay;
    ds[5] = kz * p * q + az;
    ds[6] = r * v - q * w - c.gravity * sth + fx;
    ds[7] = p * w - r * u + c.gravity * sphi * cth + fy;
    ds[8] = q * u - p * v + c.gravity * cth * cphi + fz - thrust_acc;
    ds[9] = cth * cpsi * u + (sphi * sth * cpsi - cphi * spsi) * v +
            (cphi * sth * cpsi + sphi * spsi) * w;
    ds[10] = cth * spsi * u + (sphi * sth * spsi + cphi * cpsi) * v +
             (cphi * sth * spsi - sphi * cpsi) * w;
    ds[11] = -sth * u + sphi * cth * v + cphi * cth * w;

    State next(12);
    for (std::size_t k = 0; k < 12; ++k) next[k] = s[k] + ds[k] * h;
    s = std::move(next);
  }
  for (auto& var : s) var = ad::clamp(var, -c.state_limit, c.state_limit);
  ad::Var capped = ad::cap_gradient_norm_cols(ad::concat_rows(s), c.gradient_cap);
  State out;
  for (std::size_t k = 0; k < 12; ++k) out.push_back(ad::row(capped, k));
  return out;
}

ad::Var Drone::reward(ad::Tape& tape, const State& state, const Matrix&, const Matrix&,
                      Design) const {
  const auto& c = constants_;
  const ad::Var &phi = state[0], &th = state[1], &psi = state[2];
  const ad::Var &u = state[6], &v = state[7], &w = state[8];
  const ad::Var &x = state[9], &y = state[10], &z = state[11];
  const std::size_t n = std::max(x.cols(), y.cols());
  auto xs = x.value();
  auto ys = y.value();

  // Nearest-point angle per column, then one Newton step of the stationarity
  // condition on the tape: the value stays put while the derivative with
  // respect to (x, y) becomes the implicit-function derivative.
  Matrix px(1, n), py(1, n);
  Matrix qx(1, n), qy(1, n), dqx(1, n), dqy(1, n), ddqx(1, n), ddqy(1, n), angle(1, n);
  Matrix newton(1, n);
  for (std::size_t m = 0; m < n; ++m) {
    const double xm = xs[xs.size() == 1 ? 0 : m];
    const double ym = ys[ys.size() == 1 ? 0 : m];
    const EllipsePoint e = ellipse_project(xm, ym, c.r_x, c.r_y);
    const double ct = std::cos(e.angle);
    const double st = std::sin(e.angle);
    angle(0, m) = e.angle;
    px(0, m) = e.x;
    py(0, m) = e.y;
    qx(0, m) = c.r_x * (1.0 + ct);
    qy(0, m) = c.r_y * st;
    dqx(0, m) = -c.r_x * st;
    dqy(0, m) = c.r_y * ct;
    ddqx(0, m) = -c.r_x * ct;
    ddqy(0, m) = -c.r_y * st;
    const double curvature = dqx(0, m) * dqx(0, m) + dqy(0, m) * dqy(0, m) +
                             (qx(0, m) - xm) * ddqx(0, m) + (qy(0, m) - ym) * ddqy(0, m);
    newton(0, m) = curvature > 1e-9 ? 1.0 : 0.0;
  }
  ad::Var t0 = tape.constant(angle);
  ad::Var gap_x = tape.constant(qx) - x;
  ad::Var gap_y = tape.constant(qy) - y;
  ad::Var stationarity = gap_x * tape.constant(dqx) + gap_y * tape.constant(dqy);
  ad::Var curvature = tape.constant(dqx) * tape.constant(dqx) +
                      tape.constant(dqy) * tape.constant(dqy) +
                      gap_x * tape.constant(ddqx) + gap_y * tape.constant(ddqy);
  ad::Var safe_curvature = ad::where(newton, curvature, tape.constant(1.0));
  ad::Var t = ad::where(newton, t0 - stationarity / safe_curvature, t0);
  // Values are the projected point itself; the angle only carries the
  // derivative, through a term that is exactly zero in value.
  ad::Var ox = c.r_x * ad::cos(t);
  ad::Var oy = c.r_y * ad::sin(t);
  ad::Var xe = tape.constant(px) + (ox - tape.constant(ox.matrix()));
  ad::Var ye = tape.constant(py) + (oy - tape.constant(oy.matrix()));

  ad::Var distance2 = ad::square(xe - x) + ad::square(ye - y) + ad::square(z);
  ad::Var gx = ye * (c.r_x / c.r_y);
  ad::Var gy = (xe - c.r_x) * (-c.r_y / c.r_x);
  ad::Var gnorm = ad::sqrt(ad::square(gx) + ad::square(gy));

  ad::Var sphi = ad::sin(phi), cphi = ad::cos(phi);
  ad::Var sth = ad::sin(th), cth = ad::cos(th);
  ad::Var spsi = ad::sin(psi), cpsi = ad::cos(psi);
  ad::Var vx = cth * cpsi * u + (sphi * sth * cpsi - cphi * spsi) * v +
               (cphi * sth * cpsi + sphi * spsi) * w;
  ad::Var vy = cth * spsi * u + (sphi * sth * spsi + cphi * cpsi) * v +
               (cphi * sth * spsi - sphi * cpsi) * w;
  ad::Var speed = (vx * gx + vy * gy) / gnorm;
  return -distance2 + c.lambda * ad::min(tape.constant(c.v_max), speed);
}

std::vector<ad::Var> Drone::policy_mean_shift(ad::Tape&, Design design) const {
  const ad::Var hover = drone_body(constants_, design).hover_speed;
  return {hover, hover, hover, hover};
}

}  // namespace depslab::env
