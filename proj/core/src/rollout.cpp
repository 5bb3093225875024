#include "depslab/rollout.hpp"

#include <numeric>
#include <stdexcept>

namespace depslab::algo {

Matrix snapshot(const env::State& state, std::size_t batch) {
  Matrix out(state.size(), batch);
  for (std::size_t i = 0; i < state.size(); ++i) {
    auto v = state[i].value();
    for (std::size_t m = 0; m < batch; ++m) out(i, m) = v[v.size() == 1 ? 0 : m];
  }
  return out;
}

env::State state_leaves(ad::Tape& tape, const Matrix& values) {
  env::State s;
  s.reserve(values.rows);
  for (std::size_t i = 0; i < values.rows; ++i) {
    s.push_back(tape.leaf(std::span<const double>(values.data.data() + i * values.cols,
                                                  values.cols),
                          1, values.cols, false));
  }
  return s;
}

std::vector<ad::Var> design_columns(ad::Tape& tape, const Matrix& designs, bool requires_grad) {
  std::vector<ad::Var> out;
  for (std::size_t i = 0; i < designs.rows; ++i) {
    out.push_back(tape.leaf(std::span<const double>(designs.data.data() + i * designs.cols,
                                                    designs.cols),
                            1, designs.cols, requires_grad));
  }
  return out;
}

HistoryBatch generate_histories(ad::Tape& tape, const Rollout& r, std::size_t batch, Rng& rng,
                                const Frozen* replay, bool keep_states) {
  const auto& d = r.environment.descriptor();
  const auto horizon = static_cast<std::size_t>(d.horizon);
  if (batch == 0) throw std::invalid_argument("rollout: batch must be positive");
  if (replay && (replay->raw_actions.size() != horizon || replay->disturbances.size() != horizon ||
                 replay->initial_noise.cols != batch)) {
    throw std::invalid_argument("rollout: replayed draws do not match horizon or batch");
  }

  HistoryBatch out;
  out.draws.initial_noise =
      replay ? replay->initial_noise : r.environment.sample_initial_noise(batch, rng);
  env::State state = r.environment.initial_state(tape, r.design, out.draws.initial_noise);
  const std::vector<ad::Var> shift = r.environment.policy_mean_shift(tape, r.design);

  ad::Var log_policy = tape.full(1, batch, 0.0);
  ad::Var log_disturbance = tape.full(1, batch, 0.0);
  ad::Var returns = tape.full(1, batch, 0.0);
  for (std::size_t t = 0; t < horizon; ++t) {
    const policy::StepInput in{state, static_cast<int>(t), r.design, shift};
    if (keep_states) out.states.push_back(snapshot(state, batch));
    Matrix raw;
    Matrix action;
    ad::Var lp;
    if (replay) {
      raw = replay->raw_actions[t];
      action = r.policy.action_of(raw);
      lp = r.policy.log_prob(tape, r.theta, in, raw);
    } else {
      policy::ActionDraw draw = r.policy.sample(tape, r.theta, in, rng);
      raw = std::move(draw.raw);
      action = std::move(draw.action);
      lp = draw.log_prob;
    }
    const Matrix xi =
        replay ? replay->disturbances[t] : r.environment.sample_disturbance(state, action, rng);
    if (keep_states) out.step_log_policy.push_back(lp.matrix());

    log_policy = log_policy + lp;
    log_disturbance =
        log_disturbance + r.environment.disturbance_log_density(tape, state, action, xi);
    returns = returns + r.environment.reward(tape, state, action, xi, r.design);
    state = r.environment.transition(tape, state, action, xi, r.design);

    out.draws.raw_actions.push_back(std::move(raw));
    out.draws.disturbances.push_back(xi);
  }
  out.log_policy = log_policy;
  out.log_disturbance = log_disturbance;
  out.returns = returns;
  auto rv = returns.value();
  out.return_values.assign(rv.begin(), rv.end());
  return out;
}

ad::Var deps_loss(const HistoryBatch& batch, double baseline) {
  ad::Tape& tape = *batch.returns.tape();
  const std::size_t m = batch.return_values.size();
  Matrix advantage(1, m);
  for (std::size_t i = 0; i < m; ++i) advantage(0, i) = batch.return_values[i] - baseline;
  ad::Var score = (batch.log_policy + batch.log_disturbance) * tape.constant(advantage);
  return -(ad::sum(score) + ad::sum(batch.returns)) / static_cast<double>(m);
}

double mean_of(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean of an empty set");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

std::vector<double> sample_returns(const env::Environment& environment,
                                   std::span<const double> design,
                                   const policy::Policy& policy,
                                   std::span<const double> theta, std::size_t n, Rng& rng) {
  const auto horizon = environment.descriptor().horizon;
  ad::Tape tape;
  const Matrix noise = environment.sample_initial_noise(n, rng);
  Matrix state_values;
  {
    const auto psi = env::design_leaves(tape, design, false);
    state_values = snapshot(environment.initial_state(tape, psi, noise), n);
  }
  std::vector<double> returns(n, 0.0);
  for (int t = 0; t < horizon; ++t) {
    tape.clear();
    const auto psi = env::design_leaves(tape, design, false);
    const env::State state = state_leaves(tape, state_values);
    const ad::Var th = tape.leaf(theta, theta.size(), 1, false);
    const std::vector<ad::Var> shift = environment.policy_mean_shift(tape, psi);
    const policy::StepInput in{state, t, psi, shift};
    const policy::ActionDraw draw = policy.sample(tape, th, in, rng);
    const Matrix xi = environment.sample_disturbance(state, draw.action, rng);
    auto r = environment.reward(tape, state, draw.action, xi, psi).value();
    for (std::size_t m = 0; m < n; ++m) returns[m] += r[r.size() == 1 ? 0 : m];
    state_values = snapshot(environment.transition(tape, state, draw.action, xi, psi), n);
  }
  return returns;
}

}  // namespace depslab::algo
