#include "depslab/train.hpp"

#include <stdexcept>

#include "depslab/optim.hpp"
#include "depslab/rollout.hpp"

namespace depslab::algo {

std::vector<double> random_design(const env::Descriptor& descriptor, Rng& rng) {
  const auto& box = descriptor.design_space;
  std::vector<double> psi(box.size());
  for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = uniform(rng, box.lower[i], box.upper[i]);
  return psi;
}

namespace {

metrics::RunRow evaluate(const env::Environment& environment, const policy::Policy& policy,
                         const std::vector<double>& design, const std::vector<double>& theta,
                         const DepsConfig& config, std::size_t iteration) {
  Rng rng = make_rng(config.seed, iteration, Purpose::kEval);
  metrics::RunRow row;
  row.iteration = iteration;
  row.stats =
      metrics::expected_return(environment, design, policy, theta, config.eval_samples, rng);
  row.design = design;
  return row;
}

}  // namespace

TrainResult deps_train(const env::Environment& environment, const policy::Policy& policy,
                       const DepsConfig& config, const RowCallback& on_row) {
  const auto& d = environment.descriptor();
  if (config.batch == 0 || config.iterations == 0) {
    throw std::invalid_argument("deps: batch and iterations must be positive");
  }
  Rng init = make_rng(config.seed, 0, Purpose::kInit);
  std::vector<double> psi = config.initial_design ? *config.initial_design : random_design(d, init);
  std::vector<double> theta =
      config.initial_theta ? *config.initial_theta : policy.initial_parameters(init);
  if (psi.size() != d.design_dim() || theta.size() != policy.parameter_count()) {
    throw std::invalid_argument("deps: initial design or policy parameters have wrong length");
  }
  project_box(psi, d.design_space);

  // Adam moves psi / scale; the box projection happens in psi units.
  std::vector<double> scaled(psi.size());
  Adam design_opt(psi.size(), {.step = config.design_step});
  Adam policy_opt(theta.size(), {.step = config.policy_step});
  std::vector<double> design_grad(psi.size());

  TrainResult result;
  ad::Tape tape;
  for (std::size_t k = 0; k < config.iterations; ++k) {
    if (config.eval_every > 0 && k % config.eval_every == 0) {
      result.curve.push_back(evaluate(environment, policy, psi, theta, config, k));
      if (on_row) on_row(result.curve.back());
    }

    tape.clear();
    const auto design = env::design_leaves(tape, psi, config.optimize_design);
    const ad::Var th = tape.leaf(theta, theta.size(), 1, true);
    Rng rng = make_rng(config.seed, k, Purpose::kTrain);
    const HistoryBatch batch =
        generate_histories(tape, {environment, policy, design, th}, config.batch, rng);
    const ad::Var loss = deps_loss(batch, mean_of(batch.return_values));
    tape.backward(loss);

    policy_opt.descend(theta, tape.grad(th));
    if (config.optimize_design) {
      for (std::size_t i = 0; i < psi.size(); ++i) {
        scaled[i] = psi[i] / d.design_scale[i];
        design_grad[i] = tape.grad(design[i])[0] * d.design_scale[i];
      }
      design_opt.descend(scaled, design_grad);
      for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = scaled[i] * d.design_scale[i];
      project_box(psi, d.design_space);
    }
  }
  result.design = psi;
  result.theta = theta;
  result.final = evaluate(environment, policy, psi, theta, config, config.iterations);
  return result;
}

TrainResult reinforce_train(const env::Environment& environment, const policy::Policy& policy,
                            std::vector<double> design, DepsConfig config,
                            const RowCallback& on_row) {
  config.optimize_design = false;
  config.initial_design = std::move(design);
  return deps_train(environment, policy, config, on_row);
}

}  // namespace depslab::algo
