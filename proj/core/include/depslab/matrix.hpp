#pragma once

#include <cstddef>
#include <vector>

namespace depslab {

// Plain row-major block of doubles used for values that live off the tape:
// sampled actions, disturbances, frozen rollout inputs.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values);

  static Matrix column(std::vector<double> values);
  static Matrix row(std::vector<double> values);

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
};

}  // namespace depslab
