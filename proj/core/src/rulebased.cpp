#include "depslab/rulebased.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "depslab/msd.hpp"

namespace depslab::policy {

namespace {

double column_value(std::span<const double> v, std::size_t m) {
  return v[v.size() == 1 ? 0 : m];
}

Matrix actions_from(const std::vector<double>& actions, const Matrix& raw) {
  Matrix a(1, raw.cols);
  for (std::size_t m = 0; m < raw.cols; ++m) {
    a(0, m) = actions.at(static_cast<std::size_t>(raw(0, m)));
  }
  return a;
}

std::size_t index_of(const std::vector<double>& actions, double value) {
  auto it = std::find(actions.begin(), actions.end(), value);
  if (it == actions.end()) {
    throw std::invalid_argument("rule policy: action " + std::to_string(value) +
                                " is not in the action set");
  }
  return static_cast<std::size_t>(it - actions.begin());
}

}  // namespace

MsdBracketing::MsdBracketing(std::vector<double> actions, double x_ref)
    : actions_(std::move(actions)), x_ref_(x_ref) {
  if (actions_.empty()) throw std::invalid_argument("msd1: empty action set");
  std::sort(actions_.begin(), actions_.end());
}

MsdBracketing::Bracket MsdBracketing::bracket(double omega) const {
  const double a_eq = std::clamp(omega * omega * x_ref_, actions_.front(), actions_.back());
  // Smallest action >= a_eq, and the largest one strictly below it.
  const auto up = std::lower_bound(actions_.begin(), actions_.end(), a_eq);
  const auto upper = static_cast<std::size_t>(up - actions_.begin());
  if (upper == 0) return {0, 0, 1.0};
  const std::size_t lower = upper - 1;
  const double p_upper = (a_eq - actions_[lower]) / (actions_[upper] - actions_[lower]);
  return {lower, upper, p_upper};
}

ActionDraw MsdBracketing::sample(ad::Tape& tape, ad::Var, const StepInput& in, Rng& rng) const {
  const std::size_t n = env::batch_of(in.state);
  auto omega = in.design[0].value();
  ActionDraw draw;
  draw.raw = Matrix(1, n);
  Matrix lp(1, n);
  for (std::size_t m = 0; m < n; ++m) {
    const Bracket b = bracket(column_value(omega, m));
    const bool take_upper = uniform(rng, 0.0, 1.0) < b.p_upper;
    draw.raw(0, m) = static_cast<double>(take_upper ? b.upper : b.lower);
    lp(0, m) = std::log(take_upper ? b.p_upper : 1.0 - b.p_upper);
  }
  draw.action = action_of(draw.raw);
  draw.log_prob = tape.constant(lp);
  return draw;
}

ad::Var MsdBracketing::log_prob(ad::Tape& tape, ad::Var, const StepInput& in,
                                const Matrix& raw) const {
  auto omega = in.design[0].value();
  Matrix lp(1, raw.cols);
  for (std::size_t m = 0; m < raw.cols; ++m) {
    const Bracket b = bracket(column_value(omega, m));
    const auto k = static_cast<std::size_t>(raw(0, m));
    const double p = k == b.upper ? b.p_upper : (k == b.lower ? 1.0 - b.p_upper : 0.0);
    lp(0, m) = std::log(p);
  }
  return tape.constant(lp);
}

Matrix MsdBracketing::action_of(const Matrix& raw) const { return actions_from(actions_, raw); }

// ---------------------------------------------------------------------------

MsdCounterSpring::MsdCounterSpring(std::vector<double> actions, double x_ref, double pull)
    : actions_(std::move(actions)),
      x_ref_(x_ref),
      pull_index_(index_of(actions_, pull)),
      rest_index_(index_of(actions_, 0.0)) {}

ActionDraw MsdCounterSpring::sample(ad::Tape& tape, ad::Var, const StepInput& in, Rng&) const {
  const std::size_t n = env::batch_of(in.state);
  auto x = in.state.at(0).value();
  ActionDraw draw;
  draw.raw = Matrix(1, n);
  for (std::size_t m = 0; m < n; ++m) {
    draw.raw(0, m) = static_cast<double>(column_value(x, m) > x_ref_ ? pull_index_ : rest_index_);
  }
  draw.action = action_of(draw.raw);
  draw.log_prob = tape.full(1, n, 0.0);
  return draw;
}

ad::Var MsdCounterSpring::log_prob(ad::Tape& tape, ad::Var, const StepInput&,
                                   const Matrix& raw) const {
  return tape.full(1, raw.cols, 0.0);
}

Matrix MsdCounterSpring::action_of(const Matrix& raw) const {
  return actions_from(actions_, raw);
}

// ---------------------------------------------------------------------------

std::pair<double, double> MicrogridRule::decide(double soc, double load_mean, double pv_mean,
                                                double battery_capacity,
                                                double genset_capacity) const {
  if (kind_ == Kind::kGreedy) {
    if (load_mean <= pv_mean) return {std::min(battery_capacity - soc, pv_mean - load_mean), 0.0};
    if (load_mean >= pv_mean + soc) {
      return {-soc, std::min(genset_capacity, load_mean - pv_mean - soc)};
    }
    return {std::max(-soc, pv_mean - load_mean), 0.0};
  }
  const double balance = pv_mean + genset_capacity - load_mean;
  if (balance >= 0.0) return {std::min(battery_capacity - soc, balance), genset_capacity};
  return {std::max(-soc, balance), genset_capacity};
}

ActionDraw MicrogridRule::sample(ad::Tape& tape, ad::Var, const StepInput& in, Rng&) const {
  const std::size_t n = env::batch_of(in.state);
  auto soc = in.state.at(0).value();
  auto load = in.state.at(3).value();
  auto pv = in.state.at(4).value();
  auto cb = in.design[0].value();
  auto cg = in.design[2].value();
  ActionDraw draw;
  draw.raw = Matrix(2, n);
  for (std::size_t m = 0; m < n; ++m) {
    const auto [battery, genset] =
        decide(column_value(soc, m), column_value(load, m), column_value(pv, m),
               column_value(cb, m), column_value(cg, m));
    draw.raw(0, m) = battery;
    draw.raw(1, m) = genset;
  }
  draw.action = draw.raw;
  draw.log_prob = tape.full(1, n, 0.0);
  return draw;
}

ad::Var MicrogridRule::log_prob(ad::Tape& tape, ad::Var, const StepInput&,
                                const Matrix& raw) const {
  return tape.full(1, raw.cols, 0.0);
}

// ---------------------------------------------------------------------------

std::unique_ptr<Policy> make_rule_policy(const env::Environment& environment, int variant) {
  const auto& d = environment.descriptor();
  if (variant != 1 && variant != 2) {
    throw std::invalid_argument("rule-based policy variant must be 1 or 2");
  }
  if (d.name == "msd") {
    const auto* msd = dynamic_cast<const env::MassSpringDamper*>(&environment);
    const double x_ref = msd ? msd->constants().x_ref : 0.2;
    if (variant == 1) return std::make_unique<MsdBracketing>(d.actions.values, x_ref);
    return std::make_unique<MsdCounterSpring>(d.actions.values, x_ref);
  }
  if (d.name == "microgrid") {
    return std::make_unique<MicrogridRule>(variant == 1 ? MicrogridRule::Kind::kGreedy
                                                        : MicrogridRule::Kind::kFullGenset);
  }
  throw std::invalid_argument("no rule-based policy for environment '" + d.name +
                              "': designing one a priori is out of reach for this system");
}

}  // namespace depslab::policy
