#include "depslab/jodc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace depslab::algo {

DesignDistribution DesignDistribution::initial(const env::Descriptor& d, double std_fraction,
                                               Rng& rng) {
  if (!(std_fraction > 0.0)) throw std::invalid_argument("jodc: initial std must be positive");
  const std::vector<double> psi = random_design(d, rng);
  DesignDistribution p;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double range = (d.design_space.upper[i] - d.design_space.lower[i]) / d.design_scale[i];
    p.mean.push_back(psi[i] / d.design_scale[i]);
    p.log_std.push_back(std::log(std_fraction * range));
    p.floor.push_back(1e-6 * range);
  }
  return p;
}

std::vector<double> DesignDistribution::std() const {
  std::vector<double> s(mean.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::exp(log_std[i]) + floor[i];
  return s;
}

std::vector<double> DesignDistribution::mode(const env::Descriptor& d) const {
  std::vector<double> psi(mean.size());
  for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = mean[i] * d.design_scale[i];
  project_box(psi, d.design_space);
  return psi;
}

DesignDistribution::Draw DesignDistribution::sample(const env::Descriptor& d, std::size_t m,
                                                    Rng& rng) const {
  const std::vector<double> sd = std();
  Draw draw{Matrix(mean.size(), m), Matrix(mean.size(), m)};
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < mean.size(); ++i) {
      const double z = mean[i] + sd[i] * standard_normal(rng);
      draw.z(i, j) = z;
      draw.designs(i, j) = std::clamp(z * d.design_scale[i], d.design_space.lower[i],
                                      d.design_space.upper[i]);
    }
  }
  return draw;
}

double DesignDistribution::log_density(const Matrix& z, std::size_t column) const {
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  const std::vector<double> sd = std();
  double total = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double u = (z(i, column) - mean[i]) / sd[i];
    total += -0.5 * u * u - std::log(sd[i]) - kHalfLog2Pi;
  }
  return total;
}

std::vector<double> DesignDistribution::loss_gradient(const Matrix& z,
                                                      std::span<const double> weight) const {
  const std::size_t d = mean.size();
  const std::vector<double> sd = std();
  std::vector<double> grad(2 * d, 0.0);
  const auto m = static_cast<double>(z.cols);
  for (std::size_t j = 0; j < z.cols; ++j) {
    for (std::size_t i = 0; i < d; ++i) {
      const double diff = z(i, j) - mean[i];
      const double s = sd[i];
      // d log N / d mean and d log N / d log_std (through std = exp(l) + floor).
      const double d_mean = diff / (s * s);
      const double d_log_std = (diff * diff / (s * s * s) - 1.0 / s) * std::exp(log_std[i]);
      grad[i] -= weight[j] * d_mean / m;
      grad[d + i] -= weight[j] * d_log_std / m;
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------

ad::Var ppo_loss(ad::Tape& tape, const env::Environment& environment,
                 const policy::Policy& policy, const Matrix& designs, const HistoryBatch& batch,
                 ad::Var theta, double clip) {
  const std::size_t horizon = batch.draws.raw_actions.size();
  const std::size_t m = batch.return_values.size();
  if (batch.states.size() != horizon || batch.step_log_policy.size() != horizon) {
    throw std::invalid_argument("ppo: batch was generated without kept states");
  }
  if (designs.cols != m) throw std::invalid_argument("ppo: one design column per history");

  const double baseline = mean_of(batch.return_values);
  Matrix advantage(1, m);
  for (std::size_t j = 0; j < m; ++j) advantage(0, j) = batch.return_values[j] - baseline;
  const ad::Var adv = tape.constant(advantage);

  const std::vector<ad::Var> design = design_columns(tape, designs, false);
  const std::vector<ad::Var> shift = environment.policy_mean_shift(tape, design);
  ad::Var total = tape.full(1, m, 0.0);
  for (std::size_t t = 0; t < horizon; ++t) {
    const env::State state = state_leaves(tape, batch.states[t]);
    const policy::StepInput in{state, static_cast<int>(t), design, shift};
    const ad::Var lp = policy.log_prob(tape, theta, in, batch.draws.raw_actions[t]);
    const ad::Var ratio = ad::exp(lp - tape.constant(batch.step_log_policy[t]));
    total = total + ad::min(ratio * adv, ad::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv);
  }
  return -ad::sum(total) / static_cast<double>(m * horizon);
}

double ppo_update(const env::Environment& environment, const policy::Policy& policy,
                  const Matrix& designs, const HistoryBatch& batch, std::vector<double>& theta,
                  Adam& optimizer, std::size_t epochs, double clip) {
  double last = 0.0;
  ad::Tape tape;
  for (std::size_t e = 0; e < epochs; ++e) {
    tape.clear();
    const ad::Var th = tape.leaf(theta, theta.size(), 1, true);
    const ad::Var loss = ppo_loss(tape, environment, policy, designs, batch, th, clip);
    tape.backward(loss);
    last = loss.item();
    optimizer.descend(theta, tape.grad(th));
  }
  return last;
}

// ---------------------------------------------------------------------------

namespace {

void check_policy(const env::Descriptor& d, const policy::Policy& policy, bool conditioned) {
  const policy::Normalizer* n = policy.normalizer();
  const std::size_t expected = d.state_dim() + 1 + (conditioned ? d.design_dim() : 0);
  if (n ? n->size() != expected : conditioned) {
    throw std::invalid_argument(conditioned
                                    ? "jodc: policy is not conditioned on the design"
                                    : "jodc: policy expects design inputs; set condition_on_design");
  }
}

// Histories rolled out in per-column designs, with states kept for PPO.
HistoryBatch roll_out(ad::Tape& tape, const env::Environment& environment,
                      const policy::Policy& policy, const Matrix& designs,
                      const std::vector<double>& theta, Rng& rng) {
  tape.clear();
  const std::vector<ad::Var> design = design_columns(tape, designs, false);
  const ad::Var th = tape.leaf(theta, theta.size(), 1, false);
  return generate_histories(tape, {environment, policy, design, th}, designs.cols, rng, nullptr,
                            true);
}

metrics::RunRow evaluate(const env::Environment& environment, const policy::Policy& policy,
                         const DesignDistribution& p, const std::vector<double>& theta,
                         const JodcConfig& config, std::size_t iteration) {
  Rng rng = make_rng(config.seed, iteration, Purpose::kEval);
  metrics::RunRow row;
  row.iteration = iteration;
  row.design = p.mode(environment.descriptor());
  row.stats = metrics::expected_return(environment, row.design, policy, theta,
                                       config.eval_samples, rng);
  return row;
}

}  // namespace

JodcResult jodc_train(const env::Environment& environment, const policy::Policy& policy,
                      const JodcConfig& config, const RowCallback& on_row) {
  const auto& d = environment.descriptor();
  if (config.batch == 0 || config.iterations == 0 || config.ppo_epochs == 0) {
    throw std::invalid_argument("jodc: batch, iterations and PPO epochs must be positive");
  }
  if (!(config.ppo_clip > 0.0)) throw std::invalid_argument("jodc: PPO clip must be positive");
  check_policy(d, policy, config.condition_on_design);

  Rng init = make_rng(config.seed, 0, Purpose::kInit);
  DesignDistribution p = DesignDistribution::initial(d, config.initial_std_fraction, init);
  std::vector<double> theta = policy.initial_parameters(init);

  const std::size_t dim = d.design_dim();
  std::vector<double> phi(2 * dim);
  Adam design_opt(phi.size(), {.step = config.design_step});
  Adam policy_opt(theta.size(), {.step = config.policy_step});
  ad::Tape tape;

  for (std::size_t k = 0; k < config.prefit_iterations; ++k) {
    Rng rng = make_rng(config.seed, k, Purpose::kPrefit);
    Matrix designs(dim, config.batch);
    for (std::size_t j = 0; j < config.batch; ++j) {
      const std::vector<double> psi = random_design(d, rng);
      for (std::size_t i = 0; i < dim; ++i) designs(i, j) = psi[i];
    }
    const HistoryBatch batch = roll_out(tape, environment, policy, designs, theta, rng);
    ppo_update(environment, policy, designs, batch, theta, policy_opt, config.ppo_epochs,
               config.ppo_clip);
  }

  JodcResult result;
  std::vector<double> weight(config.batch);
  for (std::size_t k = 0; k < config.iterations; ++k) {
    if (config.eval_every > 0 && k % config.eval_every == 0) {
      result.curve.push_back(evaluate(environment, policy, p, theta, config, k));
      if (on_row) on_row(result.curve.back());
    }

    Rng design_rng = make_rng(config.seed, k, Purpose::kDesign);
    const DesignDistribution::Draw draw = p.sample(d, config.batch, design_rng);
    Rng rng = make_rng(config.seed, k, Purpose::kTrain);
    const HistoryBatch batch = roll_out(tape, environment, policy, draw.designs, theta, rng);

    const double baseline = config.design_baseline ? mean_of(batch.return_values) : 0.0;
    for (std::size_t j = 0; j < config.batch; ++j) weight[j] = batch.return_values[j] - baseline;
    const std::vector<double> grad = p.loss_gradient(draw.z, weight);

    std::copy(p.mean.begin(), p.mean.end(), phi.begin());
    std::copy(p.log_std.begin(), p.log_std.end(), phi.begin() + static_cast<std::ptrdiff_t>(dim));
    design_opt.descend(phi, grad);
    for (std::size_t i = 0; i < dim; ++i) {
      // The mean stays inside the scaled box so clipped samples keep some spread.
      p.mean[i] = std::clamp(phi[i], d.design_space.lower[i] / d.design_scale[i],
                             d.design_space.upper[i] / d.design_scale[i]);
      p.log_std[i] = phi[dim + i];
    }

    ppo_update(environment, policy, draw.designs, batch, theta, policy_opt, config.ppo_epochs,
               config.ppo_clip);
  }
  result.distribution = p;
  result.theta = theta;
  result.final = evaluate(environment, policy, p, theta, config, config.iterations);
  return result;
}

}  // namespace depslab::algo
