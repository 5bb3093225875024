// Independent oracles shared by the unit and acceptance tests. Nothing here
// calls into the library code it checks.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

namespace depslab::testing {

inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

// Central differences of f at x, one coordinate at a time.
inline std::vector<double> central_difference(const std::function<double(std::vector<double>)>& f,
                                              std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// x'' = -2 zeta omega x' - omega^2 x + u integrated with classic RK4.
inline std::array<double, 2> msd_rk4(double x, double v, double u, double omega, double zeta,
                                     double tau, int steps) {
  auto accel = [&](double px, double pv) {
    return -2.0 * zeta * omega * pv - omega * omega * px + u;
  };
  const double h = tau / steps;
  for (int i = 0; i < steps; ++i) {
    const double k1x = v, k1v = accel(x, v);
    const double k2x = v + 0.5 * h * k1v, k2v = accel(x + 0.5 * h * k1x, v + 0.5 * h * k1v);
    const double k3x = v + 0.5 * h * k2v, k3v = accel(x + 0.5 * h * k2x, v + 0.5 * h * k2v);
    const double k4x = v + h * k3v, k4v = accel(x + h * k3x, v + h * k3v);
    x += h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
    v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
  }
  return {x, v};
}

// Exact value of the two-step toy problem under a tabular softmax policy.
// theta is the (2 x 5) logit table, row-major: rows are actions {0, 1},
// column 0 is the context of s0 = 0 and columns 1..4 the contexts of
// s1 in {-0.1, 0.1, 0.9, 1.1}.
struct ToyOracle {
  static constexpr double kAnchors[4] = {-0.1, 0.1, 0.9, 1.1};

  static double prob(const std::vector<double>& theta, int context, int action) {
    const double l0 = theta[static_cast<std::size_t>(context)];
    const double l1 = theta[5 + static_cast<std::size_t>(context)];
    const double m = std::max(l0, l1);
    const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
    return (action == 0 ? e0 : e1) / (e0 + e1);
  }

  static int context_of(double s1) {
    int best = 0;
    for (int i = 1; i < 4; ++i) {
      if (std::fabs(kAnchors[i] - s1) < std::fabs(kAnchors[best] - s1)) best = i;
    }
    return 1 + best;
  }

  // Calls visit(probability, return) for each of the 16 (a0, xi0, a1, xi1).
  static void enumerate(const std::vector<double>& psi, const std::vector<double>& theta,
                        const std::function<void(double, double)>& visit) {
    const double penalty = 0.01 * psi[1] * psi[1];
    const double s0 = 0.0;
    for (int a0 = 0; a0 < 2; ++a0) {
      for (int x0 = -1; x0 <= 1; x0 += 2) {
        const double s1 = psi[0] * s0 + a0 + 0.1 * x0;
        for (int a1 = 0; a1 < 2; ++a1) {
          for (int x1 = -1; x1 <= 1; x1 += 2) {
            const double p = prob(theta, 0, a0) * 0.5 * prob(theta, context_of(s1), a1) * 0.5;
            const double r = -(s0 - 1) * (s0 - 1) - penalty - (s1 - 1) * (s1 - 1) - penalty;
            visit(p, r);
          }
        }
      }
    }
  }

  static double value(const std::vector<double>& psi, const std::vector<double>& theta) {
    double v = 0.0;
    enumerate(psi, theta, [&](double p, double r) { v += p * r; });
    return v;
  }
};

}  // namespace depslab::testing
