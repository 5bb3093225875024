#include "depslab/anneal.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "depslab/rulebased.hpp"

namespace depslab::algo {

double anneal_temperature(double initial, double visit, std::size_t iteration) {
  const double t1 = std::exp((visit - 1.0) * std::log(2.0)) - 1.0;
  const double s = static_cast<double>(iteration) + 2.0;
  const double t2 = std::exp((visit - 1.0) * std::log(s)) - 1.0;
  return initial * t1 / t2;
}

namespace {

constexpr double kTailLimit = 1e8;
constexpr double kMinVisitBound = 1e-10;

// Heavy-tailed visiting distribution of generalized simulated annealing,
// on the unit cube with wrap-around.
class Visitor {
 public:
  Visitor(double qv, Rng& rng) : qv_(qv), rng_(rng) {
    const double pi = std::numbers::pi;
    const double factor2 = std::exp((4.0 - qv) * std::log(qv - 1.0));
    const double factor3 = std::exp((2.0 - qv) * std::log(2.0) / (qv - 1.0));
    factor4_p_ = std::sqrt(pi) * factor2 / (factor3 * (3.0 - qv));
    const double factor5 = 1.0 / (qv - 1.0) - 0.5;
    const double d1 = 2.0 - factor5;
    factor6_ = pi * (1.0 - factor5) / std::sin(pi * (1.0 - factor5)) / std::exp(std::lgamma(d1));
  }

  // Chain step j: all coordinates move while j < dim, then one at a time.
  std::vector<double> visit(const std::vector<double>& x, std::size_t j, double temperature) {
    const std::size_t dim = x.size();
    std::vector<double> out = x;
    if (j < dim) {
      std::vector<double> steps(dim);
      for (auto& s : steps) s = draw(temperature);
      const double upper_sample = uniform(rng_, 0.0, 1.0);
      const double lower_sample = uniform(rng_, 0.0, 1.0);
      for (std::size_t i = 0; i < dim; ++i) {
        double s = steps[i];
        if (s > kTailLimit) s = kTailLimit * upper_sample;
        if (s < -kTailLimit) s = -kTailLimit * lower_sample;
        out[i] = wrap(x[i] + s);
      }
    } else {
      double s = draw(temperature);
      if (s > kTailLimit) {
        s = kTailLimit * uniform(rng_, 0.0, 1.0);
      } else if (s < -kTailLimit) {
        s = -kTailLimit * uniform(rng_, 0.0, 1.0);
      }
      const std::size_t i = j - dim;
      out[i] = wrap(x[i] + s);
    }
    return out;
  }

 private:
  double draw(double temperature) {
    const double x = standard_normal(rng_);
    const double y = standard_normal(rng_);
    const double factor1 = std::exp(std::log(temperature) / (qv_ - 1.0));
    const double factor4 = factor4_p_ * factor1;
    const double sx = x * std::exp(-(qv_ - 1.0) * std::log(factor6_ / factor4) / (3.0 - qv_));
    const double den = std::exp((qv_ - 1.0) * std::log(std::fabs(y)) / (3.0 - qv_));
    return sx / den;
  }

  static double wrap(double u) {
    double w = std::fmod(std::fmod(u, 1.0) + 1.0, 1.0);
    if (std::fabs(w) < kMinVisitBound) w += kMinVisitBound;
    return w;
  }

  double qv_;
  Rng& rng_;
  double factor4_p_;
  double factor6_;
};

}  // namespace

AnnealResult dual_anneal(const Objective& objective, const env::Box& box,
                         const AnnealConfig& config, Rng& rng) {
  const std::size_t dim = box.size();
  if (dim == 0) throw std::invalid_argument("anneal: empty search box");
  for (std::size_t i = 0; i < dim; ++i) {
    if (!(box.lower[i] < box.upper[i])) throw std::invalid_argument("anneal: degenerate box");
  }
  if (!(config.initial_temperature > 0.0)) {
    throw std::invalid_argument("anneal: initial temperature must be positive");
  }
  if (!(config.visit > 1.0 && config.visit < 3.0)) {
    throw std::invalid_argument("anneal: visiting shape must lie in (1, 3)");
  }
  if (config.max_evaluations == 0) throw std::invalid_argument("anneal: empty budget");

  Visitor visitor(config.visit, rng);
  AnnealResult result;
  auto to_box = [&](const std::vector<double>& u) {
    std::vector<double> psi(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      psi[i] = box.lower[i] + u[i] * (box.upper[i] - box.lower[i]);
    }
    return box.project(psi);
  };
  // Energy is the negated objective; every call is traced.
  auto energy = [&](const std::vector<double>& u) {
    std::vector<double> psi = to_box(u);
    const double value = objective(psi);
    if (result.trace.empty() || value > result.best_value) {
      result.best = psi;
      result.best_value = value;
    }
    result.trace.push_back({result.trace.size(), std::move(psi), value});
    return -value;
  };
  auto budget_left = [&] { return result.trace.size() < config.max_evaluations; };
  auto random_point = [&] {
    std::vector<double> u(dim);
    for (auto& v : u) v = uniform(rng, 0.0, 1.0);
    return u;
  };

  std::vector<double> current = random_point();
  double current_energy = energy(current);
  const double restart_below = config.initial_temperature * config.restart_ratio;
  std::size_t iteration = 0;
  while (budget_left() && iteration < config.max_iterations) {
    for (std::size_t i = 0; i < config.max_iterations && budget_left(); ++i) {
      if (iteration >= config.max_iterations) break;
      const double temperature =
          anneal_temperature(config.initial_temperature, config.visit, i);
      if (temperature < restart_below) {
        current = random_point();
        current_energy = energy(current);
        break;
      }
      const double temperature_step = temperature / static_cast<double>(i + 1);
      for (std::size_t j = 0; j < 2 * dim && budget_left(); ++j) {
        std::vector<double> candidate = visitor.visit(current, j, temperature);
        const double e = energy(candidate);
        if (e < current_energy) {
          current = std::move(candidate);
          current_energy = e;
          continue;
        }
        const double r = uniform(rng, 0.0, 1.0);
        const double base =
            1.0 - (1.0 - config.accept) * (e - current_energy) / temperature_step;
        const double p = base <= 0.0 ? 0.0 : std::exp(std::log(base) / (1.0 - config.accept));
        if (r <= p) {
          current = std::move(candidate);
          current_energy = e;
        }
      }
      ++iteration;
    }
  }
  return result;
}

RulebasedResult rulebased_optimize(const env::Environment& environment, int variant,
                                   const AnnealConfig& config) {
  const auto& d = environment.descriptor();
  const auto policy = policy::make_rule_policy(environment, variant);
  const std::vector<double> no_params;
  std::size_t calls = 0;
  auto objective = [&](std::span<const double> psi) {
    Rng rng = make_rng(config.seed, calls++, Purpose::kAnneal);
    return metrics::expected_return(environment, psi, *policy, no_params, config.samples, rng)
        .mean;
  };
  Rng search = make_rng(config.seed, 0, Purpose::kInit);
  RulebasedResult out;
  out.search = dual_anneal(objective, d.design_space, config, search);
  Rng eval = make_rng(config.seed, 0, Purpose::kEval);
  out.final.iteration = out.search.trace.size();
  out.final.design = out.search.best;
  out.final.stats = metrics::expected_return(environment, out.search.best, *policy, no_params,
                                             config.samples, eval);
  return out;
}

}  // namespace depslab::algo
