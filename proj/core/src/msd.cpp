#include "depslab/msd.hpp"

#include <cmath>
#include <stdexcept>

namespace depslab::env {

namespace {

enum class Damping { kUnder, kCritical, kOver };

Damping classify(double zeta, double tol) {
  if (std::fabs(zeta - 1.0) <= tol) return Damping::kCritical;
  return zeta < 1.0 ? Damping::kUnder : Damping::kOver;
}

// Elongation e = x - c and velocity v evolved over tau on one branch.
std::pair<ad::Var, ad::Var> branch(Damping kind, ad::Var c, ad::Var e, ad::Var v,
                                   ad::Var omega, ad::Var zeta, double tau) {
  if (kind == Damping::kCritical) {
    ad::Var decay = ad::exp(omega * (-tau));
    ad::Var slope = v + omega * e;
    ad::Var inner = e + slope * tau;
    return {c + decay * inner, decay * (slope - omega * inner)};
  }
  const bool under = kind == Damping::kUnder;
  ad::Var s = ad::sqrt(under ? 1.0 - ad::square(zeta) : ad::square(zeta) - 1.0);
  ad::Var k = s * omega;
  ad::Var b = (v / omega + zeta * e) / s;
  ad::Var decay = ad::exp(zeta * omega * (-tau));
  ad::Var kt = k * tau;
  ad::Var even = under ? ad::cos(kt) : ad::cosh(kt);
  ad::Var odd = under ? ad::sin(kt) : ad::sinh(kt);
  ad::Var combo = e * even + b * odd;
  // d/dtau of (even, odd) is k*(-odd, even) under, k*(odd, even) over.
  ad::Var turn = under ? b * even - e * odd : e * odd + b * even;
  return {c + decay * combo, decay * (k * turn - zeta * omega * combo)};
}

}  // namespace

MassSpringDamper::MassSpringDamper(MsdConstants constants) : constants_(constants) {
  descriptor_.name = "msd";
  descriptor_.state_names = {"x", "v"};
  descriptor_.actions.dim = 1;
  descriptor_.actions.values.assign(constants_.actions.begin(), constants_.actions.end());
  descriptor_.disturbance_dim = 1;
  descriptor_.design_names = {"omega", "zeta", "phi0", "phi1", "phi2"};
  descriptor_.design_space = {{0.1, 0.1, -2.0, -2.0, -2.0}, {1.5, 1.5, 2.0, 2.0, 2.0}};
  descriptor_.design_scale = {1.0, 1.0, 1.0, 1.0, 1.0};
  descriptor_.horizon = constants_.horizon;
}

Matrix MassSpringDamper::sample_initial_noise(std::size_t batch, Rng& rng) const {
  Matrix noise(2, batch);
  for (std::size_t m = 0; m < batch; ++m) {
    noise(0, m) = uniform(rng, constants_.x0_lo, constants_.x0_hi);
    noise(1, m) = uniform(rng, constants_.v0_lo, constants_.v0_hi);
  }
  return noise;
}

State MassSpringDamper::initial_state(ad::Tape& tape, Design, const Matrix& noise) const {
  const std::size_t n = noise.cols;
  return {tape.leaf(std::span<const double>(noise.data.data(), n), 1, n, false),
          tape.leaf(std::span<const double>(noise.data.data() + n, n), 1, n, false)};
}

Matrix MassSpringDamper::sample_disturbance(const State& state, const Matrix& action,
                                            Rng& rng) const {
  auto x = state[0].value();
  auto v = state[1].value();
  const std::size_t n = action.cols;
  Matrix xi(1, n);
  for (std::size_t m = 0; m < n; ++m) {
    const double xm = x[x.size() == 1 ? 0 : m];
    const double vm = v[v.size() == 1 ? 0 : m];
    const double sd = 0.1 * std::fabs(action(0, m)) + std::fabs(vm) + constants_.std_floor;
    xi(0, m) = xm + sd * standard_normal(rng);
  }
  return xi;
}

ad::Var MassSpringDamper::disturbance_log_density(ad::Tape& tape, const State& state,
                                                  const Matrix& action,
                                                  const Matrix& xi) const {
  Matrix action_part(1, action.cols);
  for (std::size_t m = 0; m < action.cols; ++m) {
    action_part(0, m) = 0.1 * std::fabs(action(0, m)) + constants_.std_floor;
  }
  ad::Var sd = ad::abs(state[1]) + tape.constant(action_part);
  return ad::normal_log_density(tape.constant(xi), state[0], sd);
}

State MassSpringDamper::transition(ad::Tape& tape, const State& state, const Matrix& action,
                                   const Matrix& xi, Design design) const {
  Matrix force(1, action.cols);
  for (std::size_t m = 0; m < action.cols; ++m) force(0, m) = action(0, m) + xi(0, m);
  ad::Var omega = design[0];
  ad::Var zeta = design[1];
  for (double w : omega.value()) {
    if (!(w > 0.0)) throw std::domain_error("msd: omega must be positive");
  }
  for (double z : zeta.value()) {
    if (!(z > 0.0)) throw std::domain_error("msd: zeta must be positive");
  }
  ad::Var c = tape.constant(force) / ad::square(omega);
  ad::Var e = state[0] - c;
  const ad::Var& v = state[1];
  const double tau = constants_.dt;
  const double tol = constants_.critical_tolerance;

  auto zv = zeta.value();
  const std::size_t nz = zv.size();
  Matrix is_kind[3] = {Matrix(1, nz), Matrix(1, nz), Matrix(1, nz)};
  int present[3] = {0, 0, 0};
  for (std::size_t m = 0; m < nz; ++m) {
    const auto k = static_cast<int>(classify(zv[m], tol));
    is_kind[k](0, m) = 1.0;
    ++present[k];
  }
  for (int k = 0; k < 3; ++k) {
    if (present[k] == static_cast<int>(nz)) {
      auto [x1, v1] = branch(static_cast<Damping>(k), c, e, v, omega, zeta, tau);
      return {x1, v1};
    }
  }

  // Mixed damping regimes across the batch: evaluate each branch on a zeta
  // that is valid for it, then select per column.
  const double safe_zeta[3] = {0.5, 1.0, 2.0};
  ad::Var x1;
  ad::Var v1;
  for (int k = 0; k < 3; ++k) {
    if (present[k] == 0) continue;
    ad::Var zk = ad::where(is_kind[k], zeta, tape.constant(safe_zeta[k]));
    auto [xb, vb] = branch(static_cast<Damping>(k), c, e, v, omega, zk, tau);
    if (!x1.valid()) {
      x1 = xb;
      v1 = vb;
    } else {
      x1 = ad::where(is_kind[k], xb, x1);
      v1 = ad::where(is_kind[k], vb, v1);
    }
  }
  return {x1, v1};
}

ad::Var MassSpringDamper::reward(ad::Tape&, const State& state, const Matrix&, const Matrix&,
                                 Design design) const {
  ad::Var product = ad::square(design[2] - constants_.c_phi[0]) *
                    ad::square(design[3] - constants_.c_phi[1]) *
                    ad::square(design[4] - constants_.c_phi[2]);
  ad::Var exponent = ad::abs(state[0] - constants_.x_ref) +
                     ad::square(design[0] - constants_.c_omega) +
                     ad::square(design[1] - constants_.c_zeta) + product;
  return ad::exp(-exponent);
}

std::pair<double, double> msd_solution(double x, double v, double u, double omega, double zeta,
                                       double tau, double critical_tolerance) {
  const double c = u / (omega * omega);
  const double e = x - c;
  switch (classify(zeta, critical_tolerance)) {
    case Damping::kCritical: {
      const double decay = std::exp(-omega * tau);
      const double slope = v + omega * e;
      const double inner = e + slope * tau;
      return {c + decay * inner, decay * (slope - omega * inner)};
    }
    case Damping::kUnder: {
      const double s = std::sqrt(1.0 - zeta * zeta);
      const double k = s * omega;
      const double b = (v / omega + zeta * e) / s;
      const double decay = std::exp(-zeta * omega * tau);
      const double cs = std::cos(k * tau);
      const double sn = std::sin(k * tau);
      const double combo = e * cs + b * sn;
      return {c + decay * combo, decay * (k * (b * cs - e * sn) - zeta * omega * combo)};
    }
    case Damping::kOver: {
      const double s = std::sqrt(zeta * zeta - 1.0);
      const double k = s * omega;
      const double b = (v / omega + zeta * e) / s;
      const double decay = std::exp(-zeta * omega * tau);
      const double ch = std::cosh(k * tau);
      const double sh = std::sinh(k * tau);
      const double combo = e * ch + b * sh;
      return {c + decay * combo, decay * (k * (e * sh + b * ch) - zeta * omega * combo)};
    }
  }
  return {x, v};
}

}  // namespace depslab::env
