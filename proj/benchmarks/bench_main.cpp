#include <benchmark/benchmark.h>

#include "depslab/drone.hpp"
#include "depslab/rollout.hpp"
#include "depslab/train.hpp"

namespace {

using namespace depslab;

// One batched rollout plus the backward pass of the DEPS loss.
void BM_RolloutAndBackward(benchmark::State& state, const char* name) {
  const auto environment = env::make_environment(name);
  const auto pol = policy::make_policy(*environment);
  const auto& d = environment->descriptor();
  Rng init = make_rng(0, 0, Purpose::kInit);
  const auto psi = algo::random_design(d, init);
  const auto theta = pol->initial_parameters(init);
  const auto batch = static_cast<std::size_t>(state.range(0));
  ad::Tape tape;
  std::uint64_t k = 0;
  for (auto _ : state) {
    tape.clear();
    const auto design = env::design_leaves(tape, psi, true);
    const ad::Var th = tape.leaf(theta, theta.size(), 1, true);
    Rng rng = make_rng(0, k++, Purpose::kTrain);
    const auto h = algo::generate_histories(tape, {*environment, *pol, design, th}, batch, rng);
    tape.backward(algo::deps_loss(h, algo::mean_of(h.return_values)));
    benchmark::DoNotOptimize(tape.grad(th).data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK_CAPTURE(BM_RolloutAndBackward, msd, "msd")->Arg(4)->Arg(64);
BENCHMARK_CAPTURE(BM_RolloutAndBackward, microgrid, "microgrid")->Arg(64);
BENCHMARK_CAPTURE(BM_RolloutAndBackward, drone, "drone")->Arg(64);

void BM_ExpectedReturn(benchmark::State& state) {
  const auto environment = env::make_environment("msd");
  const auto pol = policy::make_policy(*environment);
  Rng init = make_rng(0, 0, Purpose::kInit);
  const auto theta = pol->initial_parameters(init);
  const std::vector<double> psi = {0.5, 0.5, 0.5, -0.3, 0.2};
  for (auto _ : state) {
    Rng rng = make_rng(0, 0, Purpose::kEval);
    benchmark::DoNotOptimize(metrics::expected_return(*environment, psi, *pol, theta, 64, rng));
  }
}
BENCHMARK(BM_ExpectedReturn);

void BM_EllipseProjection(benchmark::State& state) {
  double x = -1.5;
  for (auto _ : state) {
    x = x > 3.5 ? -1.5 : x + 0.001;
    benchmark::DoNotOptimize(env::ellipse_project(x, 0.7, 1.0, 1.5));
  }
}
BENCHMARK(BM_EllipseProjection);

}  // namespace
BENCHMARK_MAIN();
