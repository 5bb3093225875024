// Reverse-mode automatic differentiation over dense row-major arrays.
//
// Every node on a Tape holds a (rows x cols) block of doubles. Binary and
// ternary elementwise ops broadcast: each operand dimension must equal the
// result dimension or be 1. Rollouts keep one history per column, so a whole
// batch moves through the graph with one node per operation.
//
// Non-smooth points follow fixed conventions. clamp passes the gradient
// through inside the interval and at its ends, and drops it strictly outside.
// min and max send the gradient to their first argument on ties. abs uses +1
// at zero.
#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "depslab/matrix.hpp"

namespace depslab::ad {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
};

class Tape;
struct Builder;

// Handle to a node. Cheap to copy; valid until the owning tape is cleared.
class Var {
 public:
  Var() = default;

  Tape* tape() const { return tape_; }
  std::int32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  Shape shape() const;
  std::size_t rows() const { return shape().rows; }
  std::size_t cols() const { return shape().cols; }
  std::span<const double> value() const;
  // Value of a 1x1 node.
  double item() const;
  Matrix matrix() const;

 private:
  friend class Tape;
  friend struct Builder;
  Var(Tape* tape, std::int32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::int32_t id_ = -1;
};

enum class Op : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kMin,
  kMax,
  kNeg,
  kExp,
  kLog,
  kSqrt,
  kSquare,
  kAbs,
  kTanh,
  kSin,
  kCos,
  kSinh,
  kCosh,
  kAddScalar,
  kMulScalar,
  kDivScalar,
  kPowScalar,
  kClamp,
  kWhere,
  kMatMul,
  kSum,
  kColSum,
  kView,
  kConcatRows,
  kLogSoftmax,
  kCategoricalLogProb,
  kNormalLogDensity,
  kCapNorm,
  kCapNormCols,
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves reject NaN and infinite entries with std::invalid_argument.
  Var leaf(const Matrix& value, bool requires_grad);
  Var leaf(std::span<const double> values, std::size_t rows, std::size_t cols,
           bool requires_grad);
  Var constant(const Matrix& value) { return leaf(value, false); }
  Var constant(double value);
  Var full(std::size_t rows, std::size_t cols, double value);

  // Fills the adjoint of every node that requires a gradient with
  // d(root)/d(node). root must be 1x1. Each call starts from zero adjoints,
  // and nodes are visited in reverse id order, so repeated passes agree bit
  // for bit.
  void backward(Var root);
  // Zeroes all adjoints.
  void reset();
  // Drops every node. Outstanding Vars become dangling.
  void clear();

  std::size_t size() const { return nodes_.size(); }
  Shape shape(Var v) const { return nodes_[check(v)].shape; }
  bool requires_grad(Var v) const { return nodes_[check(v)].requires_grad; }
  std::span<const double> value(Var v) const;
  // Adjoint of v; all zeros before backward() or if v needs no gradient.
  std::span<const double> grad(Var v) const;

 private:
  struct Node {
    Op op;
    bool requires_grad;
    Shape shape;
    std::int32_t in[3];
    std::size_t offset;      // into values_ and adjoints_
    std::size_t aux;         // into aux_
    std::size_t aux_size;
    double scalar;
  };

  friend struct Builder;

  std::size_t check(Var v) const;
  void backward_node(const Node& node);

  std::vector<Node> nodes_;
  std::vector<double> values_;
  mutable std::vector<double> adjoints_;
  std::vector<double> aux_;
};

// Elementwise arithmetic with broadcasting.
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double b);
Var operator+(double a, Var b);
Var operator-(Var a, double b);
Var operator-(double a, Var b);
Var operator*(Var a, double b);
Var operator*(double a, Var b);
Var operator/(Var a, double b);
Var operator/(double a, Var b);

Var min(Var a, Var b);
Var max(Var a, Var b);
Var min(Var a, double b);
Var max(Var a, double b);

Var exp(Var x);
// Throws std::domain_error on non-positive entries.
Var log(Var x);
// Throws std::domain_error on negative entries.
Var sqrt(Var x);
Var square(Var x);
Var abs(Var x);
Var tanh(Var x);
Var sin(Var x);
Var cos(Var x);
Var sinh(Var x);
Var cosh(Var x);
Var pow(Var x, double exponent);

Var clamp(Var x, Var lo, Var hi);
Var clamp(Var x, double lo, double hi);
// Picks a where mask is nonzero and b elsewhere. mask has the result shape
// or a single entry.
Var where(const Matrix& mask, Var a, Var b);

Var matmul(Var a, Var b);
// Sum of all entries, 1x1.
Var sum(Var x);
Var mean(Var x);
// Sum down each column, 1 x cols.
Var col_sum(Var x);
Var dot(Var a, Var b);

// Reinterprets count = rows*cols consecutive entries of x starting at
// offset as a rows x cols block.
Var view(Var x, std::size_t offset, std::size_t rows, std::size_t cols);
Var row(Var x, std::size_t r);
Var element(Var x, std::size_t i);
Var concat_rows(std::span<const Var> parts);
Var concat_rows(std::initializer_list<Var> parts);

// Columnwise log-softmax of a (k x n) logit block.
Var log_softmax(Var logits);
// Row of log-probabilities (1 x n) of the chosen category per column.
Var categorical_log_prob(Var logits, std::span<const std::size_t> index);
// Elementwise log N(x; mean, std^2). Throws std::domain_error if std <= 0.
Var normal_log_density(Var x, Var mean, Var std);

// Identity forward. Backward rescales the incoming adjoint so its Euclidean
// norm is at most cap (over the whole block, or per column).
Var cap_gradient_norm(Var x, double cap);
Var cap_gradient_norm_cols(Var x, double cap);

}  // namespace depslab::ad
