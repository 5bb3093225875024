#include "depslab/toy.hpp"

#include <cmath>

namespace depslab::env {

Toy::Toy() {
  descriptor_.name = "toy";
  descriptor_.state_names = {"s"};
  descriptor_.actions.dim = 1;
  descriptor_.actions.values = {0.0, 1.0};
  descriptor_.disturbance_dim = 1;
  descriptor_.design_names = {"psi1", "psi2"};
  descriptor_.design_space = {{-1.0, -1.0}, {1.0, 1.0}};
  descriptor_.design_scale = {1.0, 1.0};
  descriptor_.horizon = 2;
}

Matrix Toy::sample_initial_noise(std::size_t batch, Rng&) const { return Matrix(0, batch); }

State Toy::initial_state(ad::Tape& tape, Design, const Matrix& noise) const {
  return {tape.full(1, noise.cols, 0.0)};
}

Matrix Toy::sample_disturbance(const State&, const Matrix& action, Rng& rng) const {
  std::bernoulli_distribution coin(0.5);
  Matrix xi(1, action.cols);
  for (double& x : xi.data) x = coin(rng) ? 1.0 : -1.0;
  return xi;
}

ad::Var Toy::disturbance_log_density(ad::Tape& tape, const State&, const Matrix& action,
                                     const Matrix&) const {
  return tape.full(1, action.cols, std::log(0.5));
}

State Toy::transition(ad::Tape& tape, const State& state, const Matrix& action,
                      const Matrix& xi, Design design) const {
  Matrix shift(1, action.cols);
  for (std::size_t m = 0; m < action.cols; ++m) shift(0, m) = action(0, m) + 0.1 * xi(0, m);
  return {design[0] * state[0] + tape.constant(shift)};
}

ad::Var Toy::reward(ad::Tape&, const State& state, const Matrix&, const Matrix&,
                    Design design) const {
  return -ad::square(state[0] - 1.0) - 0.01 * ad::square(design[1]);
}

}  // namespace depslab::env
