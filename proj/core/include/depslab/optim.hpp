#pragma once

#include <span>
#include <vector>

#include "depslab/environment.hpp"

namespace depslab::algo {

struct AdamSettings {
  double step = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam. descend() moves against the gradient; callers that
// maximize pass the gradient of the negated objective, as the loss does.
class Adam {
 public:
  Adam(std::size_t size, AdamSettings settings);

  void descend(std::span<double> params, std::span<const double> grad);
  std::size_t steps() const { return steps_; }
  const AdamSettings& settings() const { return settings_; }

 private:
  AdamSettings settings_;
  std::vector<double> first_;
  std::vector<double> second_;
  std::size_t steps_ = 0;
};

// Euclidean projection onto the box, in place.
void project_box(std::span<double> x, const env::Box& box);

}  // namespace depslab::algo
