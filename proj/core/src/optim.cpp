#include "depslab/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace depslab::algo {

Adam::Adam(std::size_t size, AdamSettings settings)
    : settings_(settings), first_(size, 0.0), second_(size, 0.0) {
  if (!(settings_.step > 0.0)) throw std::invalid_argument("adam: step size must be positive");
}

void Adam::descend(std::span<double> params, std::span<const double> grad) {
  if (params.size() != first_.size() || grad.size() != first_.size()) {
    throw std::invalid_argument("adam: parameter and gradient sizes must match the state");
  }
  ++steps_;
  const auto& s = settings_;
  const double correction1 = 1.0 - std::pow(s.beta1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(s.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    first_[i] = s.beta1 * first_[i] + (1.0 - s.beta1) * grad[i];
    second_[i] = s.beta2 * second_[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    const double m_hat = first_[i] / correction1;
    const double v_hat = second_[i] / correction2;
    params[i] -= s.step * m_hat / (std::sqrt(v_hat) + s.epsilon);
  }
}

void project_box(std::span<double> x, const env::Box& box) {
  if (x.size() != box.size()) throw std::invalid_argument("project_box: dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], box.lower[i], box.upper[i]);
}

}  // namespace depslab::algo
