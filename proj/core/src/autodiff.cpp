#include "depslab/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace depslab {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != rows * cols) {
    throw std::invalid_argument("Matrix: value count does not match shape");
  }
}

Matrix Matrix::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return Matrix(n, 1, std::move(values));
}

Matrix Matrix::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Matrix(1, n, std::move(values));
}

}  // namespace depslab

namespace depslab::ad {

Shape Var::shape() const { return tape_->shape(*this); }
std::span<const double> Var::value() const { return tape_->value(*this); }

double Var::item() const {
  auto v = value();
  if (v.size() != 1) throw std::invalid_argument("Var::item on non-scalar");
  return v[0];
}

Matrix Var::matrix() const {
  auto v = value();
  Shape s = shape();
  return Matrix(s.rows, s.cols, std::vector<double>(v.begin(), v.end()));
}

namespace {

inline std::size_t bidx(Shape s, std::size_t i, std::size_t j) {
  return (s.rows == 1 ? 0 : i) * s.cols + (s.cols == 1 ? 0 : j);
}

std::size_t broadcast_dim(std::size_t a, std::size_t b) {
  if (a == b || b == 1) return a;
  if (a == 1) return b;
  throw std::invalid_argument("shape mismatch: " + std::to_string(a) +
                              " vs " + std::to_string(b));
}

Shape broadcast(Shape a, Shape b) {
  return {broadcast_dim(a.rows, b.rows), broadcast_dim(a.cols, b.cols)};
}

constexpr double kHalfLog2Pi = 0.91893853320467274178;

}  // namespace

// Friend of Tape and Var; all graph construction goes through here.
struct Builder {
  static Tape& tape_of(Var a) {
    if (!a.valid()) throw std::invalid_argument("invalid Var");
    return *a.tape_;
  }

  static Tape& tape_of(Var a, Var b) {
    Tape& t = tape_of(a);
    if (&tape_of(b) != &t) throw std::invalid_argument("Vars on different tapes");
    return t;
  }

  static Var make(Tape& t, Op op, Shape s, std::int32_t a, std::int32_t b = -1,
                  std::int32_t c = -1, double scalar = 0.0) {
    bool rg = false;
    for (std::int32_t id : {a, b, c}) {
      if (id >= 0 && t.nodes_[static_cast<std::size_t>(id)].requires_grad) rg = true;
    }
    Tape::Node n{op, rg, s, {a, b, c}, t.values_.size(), t.aux_.size(), 0, scalar};
    t.values_.resize(t.values_.size() + s.size());
    t.nodes_.push_back(n);
    return Var(&t, static_cast<std::int32_t>(t.nodes_.size() - 1));
  }

  static Tape::Node& node(Tape& t, Var v) { return t.nodes_[static_cast<std::size_t>(v.id_)]; }
  static double* ptr(Tape& t, Var v) { return t.values_.data() + node(t, v).offset; }
  static std::int32_t id(Var v) { return v.id_; }

  static void set_aux(Tape& t, Var v, std::span<const double> data) {
    Tape::Node& n = node(t, v);
    n.aux = t.aux_.size();
    n.aux_size = data.size();
    t.aux_.insert(t.aux_.end(), data.begin(), data.end());
  }

  template <class F>
  static Var binary(Op op, Var a, Var b, F f) {
    Tape& t = tape_of(a, b);
    const Shape sa = t.shape(a);
    const Shape sb = t.shape(b);
    const Shape s = broadcast(sa, sb);
    Var r = make(t, op, s, a.id_, b.id_);
    const double* pa = ptr(t, a);
    const double* pb = ptr(t, b);
    double* pr = ptr(t, r);
    const std::size_t n = s.size();
    if (sa == s && sb == s) {
      for (std::size_t i = 0; i < n; ++i) pr[i] = f(pa[i], pb[i]);
    } else if (sa == s && sb.size() == 1) {
      for (std::size_t i = 0; i < n; ++i) pr[i] = f(pa[i], pb[0]);
    } else if (sb == s && sa.size() == 1) {
      for (std::size_t i = 0; i < n; ++i) pr[i] = f(pa[0], pb[i]);
    } else {
      for (std::size_t i = 0; i < s.rows; ++i)
        for (std::size_t j = 0; j < s.cols; ++j)
          pr[i * s.cols + j] = f(pa[bidx(sa, i, j)], pb[bidx(sb, i, j)]);
    }
    return r;
  }

  template <class F>
  static Var unary(Op op, Var x, F f, double scalar = 0.0) {
    Tape& t = tape_of(x);
    Var r = make(t, op, t.shape(x), x.id_, -1, -1, scalar);
    const double* px = ptr(t, x);
    double* pr = ptr(t, r);
    const std::size_t n = t.shape(x).size();
    for (std::size_t i = 0; i < n; ++i) pr[i] = f(px[i]);
    return r;
  }

  static Var make_var(Tape& t, std::int32_t id) { return Var(&t, id); }
};

// ---------------------------------------------------------------------------
// Tape

std::size_t Tape::check(Var v) const {
  if (v.tape_ != this || v.id_ < 0 || static_cast<std::size_t>(v.id_) >= nodes_.size()) {
    throw std::invalid_argument("Var does not belong to this tape");
  }
  return static_cast<std::size_t>(v.id_);
}

Var Tape::leaf(const Matrix& value, bool requires_grad) {
  return leaf(value.data, value.rows, value.cols, requires_grad);
}

Var Tape::leaf(std::span<const double> values, std::size_t rows, std::size_t cols,
               bool requires_grad) {
  if (values.size() != rows * cols) {
    throw std::invalid_argument("leaf: value count does not match shape");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("leaf: non-finite value");
  }
  Var r = Builder::make(*this, Op::kLeaf, {rows, cols}, -1);
  nodes_.back().requires_grad = requires_grad;
  std::copy(values.begin(), values.end(), Builder::ptr(*this, r));
  return r;
}

Var Tape::constant(double value) {
  return leaf(std::span<const double>(&value, 1), 1, 1, false);
}

Var Tape::full(std::size_t rows, std::size_t cols, double value) {
  return leaf(Matrix(rows, cols, value), false);
}

std::span<const double> Tape::value(Var v) const {
  const Node& n = nodes_[check(v)];
  return {values_.data() + n.offset, n.shape.size()};
}

std::span<const double> Tape::grad(Var v) const {
  const Node& n = nodes_[check(v)];
  if (adjoints_.size() < values_.size()) adjoints_.resize(values_.size(), 0.0);
  return {adjoints_.data() + n.offset, n.shape.size()};
}

void Tape::reset() { std::fill(adjoints_.begin(), adjoints_.end(), 0.0); }

void Tape::clear() {
  nodes_.clear();
  values_.clear();
  adjoints_.clear();
  aux_.clear();
}

void Tape::backward(Var root) {
  const std::size_t r = check(root);
  if (nodes_[r].shape.size() != 1) {
    throw std::invalid_argument("backward: root must be 1x1");
  }
  adjoints_.assign(values_.size(), 0.0);
  adjoints_[nodes_[r].offset] = 1.0;
  for (std::size_t k = r + 1; k-- > 0;) {
    const Node& n = nodes_[k];
    if (n.requires_grad && n.op != Op::kLeaf) backward_node(n);
  }
}

void Tape::backward_node(const Node& n) {
  const Shape s = n.shape;
  const std::size_t size = s.size();
  const double* out = values_.data() + n.offset;
  const double* g = adjoints_.data() + n.offset;

  auto in_node = [&](int k) -> const Node* {
    return n.in[k] >= 0 ? &nodes_[static_cast<std::size_t>(n.in[k])] : nullptr;
  };
  auto val = [&](const Node* m) { return values_.data() + m->offset; };
  auto adj = [&](const Node* m) { return adjoints_.data() + m->offset; };
  auto wants = [&](const Node* m) { return m != nullptr && m->requires_grad; };

  switch (n.op) {
    case Op::kLeaf:
      return;

    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv:
    case Op::kMin:
    case Op::kMax: {
      const Node* a = in_node(0);
      const Node* b = in_node(1);
      const bool ga = wants(a);
      const bool gb = wants(b);
      const double* va = val(a);
      const double* vb = val(b);
      double* da = adj(a);
      double* db = adj(b);
      for (std::size_t i = 0; i < s.rows; ++i) {
        for (std::size_t j = 0; j < s.cols; ++j) {
          const std::size_t k = i * s.cols + j;
          const std::size_t ia = bidx(a->shape, i, j);
          const std::size_t ib = bidx(b->shape, i, j);
          const double gk = g[k];
          double ca = 0.0;
          double cb = 0.0;
          switch (n.op) {
            case Op::kAdd: ca = gk; cb = gk; break;
            case Op::kSub: ca = gk; cb = -gk; break;
            case Op::kMul: ca = gk * vb[ib]; cb = gk * va[ia]; break;
            case Op::kDiv: ca = gk / vb[ib]; cb = -gk * out[k] / vb[ib]; break;
            case Op::kMin: (va[ia] <= vb[ib] ? ca : cb) = gk; break;
            case Op::kMax: (va[ia] >= vb[ib] ? ca : cb) = gk; break;
            default: break;
          }
          if (ga) da[ia] += ca;
          if (gb) db[ib] += cb;
        }
      }
      return;
    }

    case Op::kNeg:
    case Op::kExp:
    case Op::kLog:
    case Op::kSqrt:
    case Op::kSquare:
    case Op::kAbs:
    case Op::kTanh:
    case Op::kSin:
    case Op::kCos:
    case Op::kSinh:
    case Op::kCosh:
    case Op::kAddScalar:
    case Op::kMulScalar:
    case Op::kDivScalar:
    case Op::kPowScalar: {
      const Node* x = in_node(0);
      const double* vx = val(x);
      double* dx = adj(x);
      for (std::size_t k = 0; k < size; ++k) {
        const double xv = vx[k];
        double d = 0.0;
        switch (n.op) {
          case Op::kNeg: d = -1.0; break;
          case Op::kExp: d = out[k]; break;
          case Op::kLog: d = 1.0 / xv; break;
          case Op::kSqrt: d = 0.5 / out[k]; break;
          case Op::kSquare: d = 2.0 * xv; break;
          case Op::kAbs: d = xv >= 0.0 ? 1.0 : -1.0; break;
          case Op::kTanh: d = 1.0 - out[k] * out[k]; break;
          case Op::kSin: d = std::cos(xv); break;
          case Op::kCos: d = -std::sin(xv); break;
          case Op::kSinh: d = std::cosh(xv); break;
          case Op::kCosh: d = std::sinh(xv); break;
          case Op::kAddScalar: d = 1.0; break;
          case Op::kMulScalar: d = n.scalar; break;
          case Op::kDivScalar: d = 1.0 / n.scalar; break;
          case Op::kPowScalar: d = n.scalar * std::pow(xv, n.scalar - 1.0); break;
          default: break;
        }
        dx[k] += g[k] * d;
      }
      return;
    }

    case Op::kClamp: {
      const Node* x = in_node(0);
      const Node* lo = in_node(1);
      const Node* hi = in_node(2);
      const double* vx = val(x);
      const double* vlo = val(lo);
      const double* vhi = val(hi);
      for (std::size_t i = 0; i < s.rows; ++i) {
        for (std::size_t j = 0; j < s.cols; ++j) {
          const std::size_t k = i * s.cols + j;
          const std::size_t ix = bidx(x->shape, i, j);
          const std::size_t il = bidx(lo->shape, i, j);
          const std::size_t ih = bidx(hi->shape, i, j);
          if (vx[ix] < vlo[il]) {
            if (wants(lo)) adj(lo)[il] += g[k];
          } else if (vx[ix] > vhi[ih]) {
            if (wants(hi)) adj(hi)[ih] += g[k];
          } else if (wants(x)) {
            adj(x)[ix] += g[k];
          }
        }
      }
      return;
    }

    case Op::kWhere: {
      const Node* a = in_node(0);
      const Node* b = in_node(1);
      const double* mask = aux_.data() + n.aux;
      const bool single = n.aux_size == 1;
      for (std::size_t i = 0; i < s.rows; ++i) {
        for (std::size_t j = 0; j < s.cols; ++j) {
          const std::size_t k = i * s.cols + j;
          if (mask[single ? 0 : k] != 0.0) {
            if (wants(a)) adj(a)[bidx(a->shape, i, j)] += g[k];
          } else if (wants(b)) {
            adj(b)[bidx(b->shape, i, j)] += g[k];
          }
        }
      }
      return;
    }

    case Op::kMatMul: {
      const Node* a = in_node(0);
      const Node* b = in_node(1);
      const std::size_t m = a->shape.rows;
      const std::size_t inner = a->shape.cols;
      const std::size_t cols = b->shape.cols;
      const double* va = val(a);
      const double* vb = val(b);
      if (wants(a)) {
        double* da = adj(a);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < inner; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < cols; ++j) acc += g[i * cols + j] * vb[p * cols + j];
            da[i * inner + p] += acc;
          }
      }
      if (wants(b)) {
        double* db = adj(b);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < inner; ++p) {
            const double av = va[i * inner + p];
            for (std::size_t j = 0; j < cols; ++j) db[p * cols + j] += av * g[i * cols + j];
          }
      }
      return;
    }

    case Op::kSum: {
      const Node* x = in_node(0);
      double* dx = adj(x);
      for (std::size_t k = 0; k < x->shape.size(); ++k) dx[k] += g[0];
      return;
    }

    case Op::kColSum: {
      const Node* x = in_node(0);
      double* dx = adj(x);
      for (std::size_t i = 0; i < x->shape.rows; ++i)
        for (std::size_t j = 0; j < x->shape.cols; ++j) dx[i * x->shape.cols + j] += g[j];
      return;
    }

    case Op::kView: {
      double* dx = adj(in_node(0)) + n.aux;
      for (std::size_t k = 0; k < size; ++k) dx[k] += g[k];
      return;
    }

    case Op::kConcatRows: {
      std::size_t at = 0;
      for (std::size_t p = 0; p < n.aux_size; ++p) {
        const Node& part = nodes_[static_cast<std::size_t>(aux_[n.aux + p])];
        const std::size_t len = part.shape.size();
        if (part.requires_grad) {
          double* dp = adjoints_.data() + part.offset;
          for (std::size_t k = 0; k < len; ++k) dp[k] += g[at + k];
        }
        at += len;
      }
      return;
    }

    case Op::kLogSoftmax: {
      double* dx = adj(in_node(0));
      for (std::size_t j = 0; j < s.cols; ++j) {
        double total = 0.0;
        for (std::size_t i = 0; i < s.rows; ++i) total += g[i * s.cols + j];
        for (std::size_t i = 0; i < s.rows; ++i) {
          const std::size_t k = i * s.cols + j;
          dx[k] += g[k] - std::exp(out[k]) * total;
        }
      }
      return;
    }

    case Op::kCategoricalLogProb: {
      const Node* x = in_node(0);
      const double* vx = val(x);
      double* dx = adj(x);
      const std::size_t k_rows = x->shape.rows;
      const std::size_t cols = x->shape.cols;
      for (std::size_t j = 0; j < cols; ++j) {
        double hi = vx[j];
        for (std::size_t i = 1; i < k_rows; ++i) hi = std::max(hi, vx[i * cols + j]);
        double z = 0.0;
        for (std::size_t i = 0; i < k_rows; ++i) z += std::exp(vx[i * cols + j] - hi);
        const auto chosen = static_cast<std::size_t>(aux_[n.aux + j]);
        for (std::size_t i = 0; i < k_rows; ++i) {
          const double p = std::exp(vx[i * cols + j] - hi) / z;
          dx[i * cols + j] += g[j] * ((i == chosen ? 1.0 : 0.0) - p);
        }
      }
      return;
    }

    case Op::kNormalLogDensity: {
      const Node* x = in_node(0);
      const Node* mu = in_node(1);
      const Node* sd = in_node(2);
      for (std::size_t i = 0; i < s.rows; ++i) {
        for (std::size_t j = 0; j < s.cols; ++j) {
          const std::size_t k = i * s.cols + j;
          const std::size_t ix = bidx(x->shape, i, j);
          const std::size_t im = bidx(mu->shape, i, j);
          const std::size_t is = bidx(sd->shape, i, j);
          const double sigma = val(sd)[is];
          const double z = (val(x)[ix] - val(mu)[im]) / sigma;
          if (wants(x)) adj(x)[ix] -= g[k] * z / sigma;
          if (wants(mu)) adj(mu)[im] += g[k] * z / sigma;
          if (wants(sd)) adj(sd)[is] += g[k] * (z * z - 1.0) / sigma;
        }
      }
      return;
    }

    case Op::kCapNorm: {
      double norm2 = 0.0;
      for (std::size_t k = 0; k < size; ++k) norm2 += g[k] * g[k];
      const double norm = std::sqrt(norm2);
      const double f = norm > n.scalar ? n.scalar / norm : 1.0;
      double* dx = adj(in_node(0));
      for (std::size_t k = 0; k < size; ++k) dx[k] += f * g[k];
      return;
    }

    case Op::kCapNormCols: {
      double* dx = adj(in_node(0));
      for (std::size_t j = 0; j < s.cols; ++j) {
        double norm2 = 0.0;
        for (std::size_t i = 0; i < s.rows; ++i) norm2 += g[i * s.cols + j] * g[i * s.cols + j];
        const double norm = std::sqrt(norm2);
        const double f = norm > n.scalar ? n.scalar / norm : 1.0;
        for (std::size_t i = 0; i < s.rows; ++i) dx[i * s.cols + j] += f * g[i * s.cols + j];
      }
      return;
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic

Var operator+(Var a, Var b) {
  return Builder::binary(Op::kAdd, a, b, [](double x, double y) { return x + y; });
}
Var operator-(Var a, Var b) {
  return Builder::binary(Op::kSub, a, b, [](double x, double y) { return x - y; });
}
Var operator*(Var a, Var b) {
  return Builder::binary(Op::kMul, a, b, [](double x, double y) { return x * y; });
}
Var operator/(Var a, Var b) {
  return Builder::binary(Op::kDiv, a, b, [](double x, double y) { return x / y; });
}
Var min(Var a, Var b) {
  return Builder::binary(Op::kMin, a, b, [](double x, double y) { return x <= y ? x : y; });
}
Var max(Var a, Var b) {
  return Builder::binary(Op::kMax, a, b, [](double x, double y) { return x >= y ? x : y; });
}

Var operator-(Var a) {
  return Builder::unary(Op::kNeg, a, [](double x) { return -x; });
}
Var operator+(Var a, double b) {
  return Builder::unary(Op::kAddScalar, a, [b](double x) { return x + b; }, b);
}
Var operator+(double a, Var b) { return b + a; }
Var operator-(Var a, double b) { return a + (-b); }
Var operator-(double a, Var b) { return (-b) + a; }
Var operator*(Var a, double b) {
  return Builder::unary(Op::kMulScalar, a, [b](double x) { return x * b; }, b);
}
Var operator*(double a, Var b) { return b * a; }
Var operator/(Var a, double b) {
  return Builder::unary(Op::kDivScalar, a, [b](double x) { return x / b; }, b);
}
Var operator/(double a, Var b) { return Builder::tape_of(b).constant(a) / b; }

Var min(Var a, double b) { return min(a, Builder::tape_of(a).constant(b)); }
Var max(Var a, double b) { return max(a, Builder::tape_of(a).constant(b)); }

Var exp(Var x) {
  return Builder::unary(Op::kExp, x, [](double v) { return std::exp(v); });
}

Var log(Var x) {
  for (double v : x.value()) {
    if (!(v > 0.0)) throw std::domain_error("log of non-positive value");
  }
  return Builder::unary(Op::kLog, x, [](double v) { return std::log(v); });
}

Var sqrt(Var x) {
  for (double v : x.value()) {
    if (v < 0.0 || std::isnan(v)) throw std::domain_error("sqrt of negative value");
  }
  return Builder::unary(Op::kSqrt, x, [](double v) { return std::sqrt(v); });
}

Var square(Var x) {
  return Builder::unary(Op::kSquare, x, [](double v) { return v * v; });
}
Var abs(Var x) {
  return Builder::unary(Op::kAbs, x, [](double v) { return std::fabs(v); });
}
Var tanh(Var x) {
  return Builder::unary(Op::kTanh, x, [](double v) { return std::tanh(v); });
}
Var sin(Var x) {
  return Builder::unary(Op::kSin, x, [](double v) { return std::sin(v); });
}
Var cos(Var x) {
  return Builder::unary(Op::kCos, x, [](double v) { return std::cos(v); });
}
Var sinh(Var x) {
  return Builder::unary(Op::kSinh, x, [](double v) { return std::sinh(v); });
}
Var cosh(Var x) {
  return Builder::unary(Op::kCosh, x, [](double v) { return std::cosh(v); });
}
Var pow(Var x, double exponent) {
  return Builder::unary(
      Op::kPowScalar, x, [exponent](double v) { return std::pow(v, exponent); }, exponent);
}

// ---------------------------------------------------------------------------
// Selection

Var clamp(Var x, Var lo, Var hi) {
  Tape& t = Builder::tape_of(x, lo);
  Builder::tape_of(x, hi);
  const Shape sx = t.shape(x);
  const Shape sl = t.shape(lo);
  const Shape sh = t.shape(hi);
  const Shape s = broadcast(broadcast(sx, sl), sh);
  Var r = Builder::make(t, Op::kClamp, s, Builder::id(x), Builder::id(lo), Builder::id(hi));
  const double* px = Builder::ptr(t, x);
  const double* pl = Builder::ptr(t, lo);
  const double* ph = Builder::ptr(t, hi);
  double* pr = Builder::ptr(t, r);
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) {
      const double v = px[bidx(sx, i, j)];
      const double l = pl[bidx(sl, i, j)];
      const double h = ph[bidx(sh, i, j)];
      pr[i * s.cols + j] = v < l ? l : (v > h ? h : v);
    }
  return r;
}

Var clamp(Var x, double lo, double hi) {
  Tape& t = Builder::tape_of(x);
  return clamp(x, t.constant(lo), t.constant(hi));
}

Var where(const Matrix& mask, Var a, Var b) {
  Tape& t = Builder::tape_of(a, b);
  const Shape sa = t.shape(a);
  const Shape sb = t.shape(b);
  Shape s = broadcast(sa, sb);
  if (mask.size() != 1) s = broadcast(s, Shape{mask.rows, mask.cols});
  if (mask.size() != 1 && mask.size() != s.size()) {
    throw std::invalid_argument("where: mask shape mismatch");
  }
  Var r = Builder::make(t, Op::kWhere, s, Builder::id(a), Builder::id(b));
  Builder::set_aux(t, r, mask.data);
  const double* pa = Builder::ptr(t, a);
  const double* pb = Builder::ptr(t, b);
  double* pr = Builder::ptr(t, r);
  const bool single = mask.size() == 1;
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) {
      const std::size_t k = i * s.cols + j;
      pr[k] = mask.data[single ? 0 : k] != 0.0 ? pa[bidx(sa, i, j)] : pb[bidx(sb, i, j)];
    }
  return r;
}

// ---------------------------------------------------------------------------
// Linear algebra and reductions

Var matmul(Var a, Var b) {
  Tape& t = Builder::tape_of(a, b);
  const Shape sa = t.shape(a);
  const Shape sb = t.shape(b);
  if (sa.cols != sb.rows) throw std::invalid_argument("matmul: inner dimension mismatch");
  Var r = Builder::make(t, Op::kMatMul, {sa.rows, sb.cols}, Builder::id(a), Builder::id(b));
  const double* pa = Builder::ptr(t, a);
  const double* pb = Builder::ptr(t, b);
  double* pr = Builder::ptr(t, r);
  for (std::size_t i = 0; i < sa.rows; ++i)
    for (std::size_t p = 0; p < sa.cols; ++p) {
      const double av = pa[i * sa.cols + p];
      const double* brow = pb + p * sb.cols;
      double* rrow = pr + i * sb.cols;
      for (std::size_t j = 0; j < sb.cols; ++j) rrow[j] += av * brow[j];
    }
  return r;
}

Var sum(Var x) {
  Tape& t = Builder::tape_of(x);
  Var r = Builder::make(t, Op::kSum, {1, 1}, Builder::id(x));
  double acc = 0.0;
  for (double v : t.value(x)) acc += v;
  *Builder::ptr(t, r) = acc;
  return r;
}

Var mean(Var x) { return sum(x) * (1.0 / static_cast<double>(x.shape().size())); }

Var col_sum(Var x) {
  Tape& t = Builder::tape_of(x);
  const Shape s = t.shape(x);
  Var r = Builder::make(t, Op::kColSum, {1, s.cols}, Builder::id(x));
  const double* px = Builder::ptr(t, x);
  double* pr = Builder::ptr(t, r);
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) pr[j] += px[i * s.cols + j];
  return r;
}

Var dot(Var a, Var b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("dot: shape mismatch");
  return sum(a * b);
}

// ---------------------------------------------------------------------------
// Structure

Var view(Var x, std::size_t offset, std::size_t rows, std::size_t cols) {
  Tape& t = Builder::tape_of(x);
  if (offset + rows * cols > t.shape(x).size()) {
    throw std::out_of_range("view: range exceeds node size");
  }
  Var r = Builder::make(t, Op::kView, {rows, cols}, Builder::id(x));
  Builder::node(t, r).aux = offset;
  const double* px = Builder::ptr(t, x) + offset;
  std::copy(px, px + rows * cols, Builder::ptr(t, r));
  return r;
}

Var row(Var x, std::size_t r) {
  const Shape s = x.shape();
  if (r >= s.rows) throw std::out_of_range("row index out of range");
  return view(x, r * s.cols, 1, s.cols);
}

Var element(Var x, std::size_t i) { return view(x, i, 1, 1); }

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
  Tape& t = Builder::tape_of(parts[0]);
  const std::size_t cols = t.shape(parts[0]).cols;
  std::size_t rows = 0;
  bool rg = false;
  std::vector<double> ids;
  ids.reserve(parts.size());
  for (Var p : parts) {
    Builder::tape_of(parts[0], p);
    if (t.shape(p).cols != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += t.shape(p).rows;
    rg = rg || t.requires_grad(p);
    ids.push_back(static_cast<double>(Builder::id(p)));
  }
  Var r = Builder::make(t, Op::kConcatRows, {rows, cols}, -1);
  Builder::node(t, r).requires_grad = rg;
  Builder::set_aux(t, r, ids);
  double* pr = Builder::ptr(t, r);
  for (Var p : parts) {
    auto v = t.value(p);
    pr = std::copy(v.begin(), v.end(), pr);
  }
  return r;
}

Var concat_rows(std::initializer_list<Var> parts) {
  return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}

// ---------------------------------------------------------------------------
// Distributions

Var log_softmax(Var logits) {
  Tape& t = Builder::tape_of(logits);
  const Shape s = t.shape(logits);
  Var r = Builder::make(t, Op::kLogSoftmax, s, Builder::id(logits));
  const double* px = Builder::ptr(t, logits);
  double* pr = Builder::ptr(t, r);
  for (std::size_t j = 0; j < s.cols; ++j) {
    double hi = px[j];
    for (std::size_t i = 1; i < s.rows; ++i) hi = std::max(hi, px[i * s.cols + j]);
    double z = 0.0;
    for (std::size_t i = 0; i < s.rows; ++i) z += std::exp(px[i * s.cols + j] - hi);
    const double lse = hi + std::log(z);
    for (std::size_t i = 0; i < s.rows; ++i) pr[i * s.cols + j] = px[i * s.cols + j] - lse;
  }
  return r;
}

Var categorical_log_prob(Var logits, std::span<const std::size_t> index) {
  Tape& t = Builder::tape_of(logits);
  const Shape s = t.shape(logits);
  if (index.size() != s.cols) {
    throw std::invalid_argument("categorical_log_prob: one index per column required");
  }
  std::vector<double> idx(index.size());
  for (std::size_t j = 0; j < index.size(); ++j) {
    if (index[j] >= s.rows) throw std::out_of_range("categorical_log_prob: index out of range");
    idx[j] = static_cast<double>(index[j]);
  }
  Var r = Builder::make(t, Op::kCategoricalLogProb, {1, s.cols}, Builder::id(logits));
  Builder::set_aux(t, r, idx);
  const double* px = Builder::ptr(t, logits);
  double* pr = Builder::ptr(t, r);
  for (std::size_t j = 0; j < s.cols; ++j) {
    double hi = px[j];
    for (std::size_t i = 1; i < s.rows; ++i) hi = std::max(hi, px[i * s.cols + j]);
    double z = 0.0;
    for (std::size_t i = 0; i < s.rows; ++i) z += std::exp(px[i * s.cols + j] - hi);
    pr[j] = px[index[j] * s.cols + j] - hi - std::log(z);
  }
  return r;
}

Var normal_log_density(Var x, Var mean_, Var std_) {
  Tape& t = Builder::tape_of(x, mean_);
  Builder::tape_of(x, std_);
  for (double v : t.value(std_)) {
    if (!(v > 0.0)) throw std::domain_error("normal_log_density: non-positive std");
  }
  const Shape sx = t.shape(x);
  const Shape sm = t.shape(mean_);
  const Shape ss = t.shape(std_);
  const Shape s = broadcast(broadcast(sx, sm), ss);
  Var r = Builder::make(t, Op::kNormalLogDensity, s, Builder::id(x), Builder::id(mean_),
                        Builder::id(std_));
  const double* px = Builder::ptr(t, x);
  const double* pm = Builder::ptr(t, mean_);
  const double* ps = Builder::ptr(t, std_);
  double* pr = Builder::ptr(t, r);
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) {
      const double sigma = ps[bidx(ss, i, j)];
      const double z = (px[bidx(sx, i, j)] - pm[bidx(sm, i, j)]) / sigma;
      pr[i * s.cols + j] = -0.5 * z * z - std::log(sigma) - kHalfLog2Pi;
    }
  return r;
}

// ---------------------------------------------------------------------------
// Gradient capping

Var cap_gradient_norm(Var x, double cap) {
  if (!(cap > 0.0)) throw std::invalid_argument("cap_gradient_norm: cap must be positive");
  return Builder::unary(Op::kCapNorm, x, [](double v) { return v; }, cap);
}

Var cap_gradient_norm_cols(Var x, double cap) {
  if (!(cap > 0.0)) throw std::invalid_argument("cap_gradient_norm_cols: cap must be positive");
  return Builder::unary(Op::kCapNormCols, x, [](double v) { return v; }, cap);
}

}  // namespace depslab::ad
