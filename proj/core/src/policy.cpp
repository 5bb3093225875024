#include "depslab/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace depslab::policy {

namespace {

Matrix column_of(const std::vector<double>& v) { return Matrix(v.size(), 1, v); }

// (state..., t) stacked into a (d x M) node, followed by the design when the
// network is conditioned on it.
ad::Var stack_inputs(ad::Tape& tape, const StepInput& in, bool with_design) {
  const std::size_t n = env::batch_of(in.state);
  auto widen = [&](ad::Var v) { return v.cols() == n ? v : v + tape.full(1, n, 0.0); };
  std::vector<ad::Var> rows;
  rows.reserve(in.state.size() + 1 + in.design.size());
  for (const auto& s : in.state) rows.push_back(widen(s));
  rows.push_back(tape.full(1, n, static_cast<double>(in.t)));
  if (with_design) {
    for (const auto& p : in.design) rows.push_back(widen(p));
  }
  return ad::concat_rows(rows);
}

std::size_t sample_category(std::span<const double> probs, std::size_t stride, std::size_t col,
                            std::size_t count, Rng& rng) {
  const double u = uniform(rng, 0.0, 1.0);
  double cumulative = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    cumulative += probs[k * stride + col];
    if (u < cumulative) return k;
  }
  // Rounding left the total just below 1: take the last likely category.
  for (std::size_t k = count; k-- > 0;) {
    if (probs[k * stride + col] > 0.0) return k;
  }
  return count - 1;
}

std::vector<std::size_t> indices_of(const Matrix& raw) {
  std::vector<std::size_t> idx(raw.cols);
  for (std::size_t m = 0; m < raw.cols; ++m) idx[m] = static_cast<std::size_t>(raw(0, m));
  return idx;
}

Matrix softmax_values(ad::Var logits) {
  const Matrix lp = ad::log_softmax(logits).matrix();
  Matrix p = lp;
  for (double& v : p.data) v = std::exp(v);
  return p;
}

}  // namespace

std::vector<double> Normalizer::normalize(std::span<const double> x) const {
  if (x.size() != mean.size()) throw std::invalid_argument("normalizer: dimension mismatch");
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - mean[i]) / std[i];
  return z;
}

std::vector<double> Normalizer::denormalize(std::span<const double> z) const {
  if (z.size() != mean.size()) throw std::invalid_argument("normalizer: dimension mismatch");
  std::vector<double> x(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) x[i] = z[i] * std[i] + mean[i];
  return x;
}

// ---------------------------------------------------------------------------

Mlp::Mlp(std::size_t inputs, std::size_t hidden, std::size_t outputs, Normalizer normalizer,
         double last_layer_shrink)
    : inputs_(inputs),
      hidden_(hidden),
      outputs_(outputs),
      normalizer_(std::move(normalizer)),
      shrink_(last_layer_shrink) {
  if (normalizer_.mean.size() != inputs_ || normalizer_.std.size() != inputs_) {
    throw std::invalid_argument("mlp: normalizer size must equal input size");
  }
  for (double s : normalizer_.std) {
    if (!(s > 0.0)) throw std::invalid_argument("mlp: normalizer std must be positive");
  }
  if (!(shrink_ >= 1.0)) throw std::invalid_argument("mlp: last-layer shrink must be >= 1");
}

std::size_t Mlp::parameter_count() const {
  return hidden_ * inputs_ + hidden_ + outputs_ * hidden_ + outputs_;
}

std::vector<double> Mlp::initial_parameters(Rng& rng) const {
  std::vector<double> theta(parameter_count(), 0.0);
  const double bound_in = 1.0 / std::sqrt(static_cast<double>(inputs_));
  const double bound_hidden = 1.0 / std::sqrt(static_cast<double>(hidden_));
  std::size_t k = 0;
  for (std::size_t i = 0; i < hidden_ * inputs_; ++i) {
    theta[k++] = uniform(rng, -bound_in, bound_in);
  }
  k += hidden_;
  for (std::size_t i = 0; i < outputs_ * hidden_; ++i) {
    theta[k++] = uniform(rng, -bound_hidden, bound_hidden) / shrink_;
  }
  return theta;
}

ad::Var Mlp::forward(ad::Tape& tape, ad::Var theta, const StepInput& in) const {
  const std::size_t plain = in.state.size() + 1;
  const bool with_design = inputs_ != plain;
  if (with_design && inputs_ != plain + in.design.size()) {
    throw std::invalid_argument("mlp: expected " + std::to_string(inputs_) +
                                " inputs, got " + std::to_string(plain) + " plus " +
                                std::to_string(in.design.size()) + " design components");
  }
  if (theta.shape().size() != parameter_count()) {
    throw std::invalid_argument("mlp: parameter vector has wrong length");
  }
  ad::Var x = stack_inputs(tape, in, with_design);
  ad::Var z = (x - tape.constant(column_of(normalizer_.mean))) /
              tape.constant(column_of(normalizer_.std));
  std::size_t offset = 0;
  ad::Var w1 = ad::view(theta, offset, hidden_, inputs_);
  offset += hidden_ * inputs_;
  ad::Var b1 = ad::view(theta, offset, hidden_, 1);
  offset += hidden_;
  ad::Var w2 = ad::view(theta, offset, outputs_, hidden_);
  offset += outputs_ * hidden_;
  ad::Var b2 = ad::view(theta, offset, outputs_, 1);
  ad::Var h = ad::tanh(ad::matmul(w1, z) + b1);
  return ad::matmul(w2, h) + b2;
}

// ---------------------------------------------------------------------------

CategoricalMlp::CategoricalMlp(std::vector<double> actions, Normalizer normalizer,
                               std::size_t hidden)
    : actions_(std::move(actions)),
      mlp_(normalizer.size(), hidden, actions_.size(), normalizer) {
  if (actions_.empty()) throw std::invalid_argument("categorical policy: empty action set");
  auto sorted = actions_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("categorical policy: repeated action value");
  }
}

std::string CategoricalMlp::architecture() const {
  std::ostringstream s;
  s << "categorical-mlp in=" << mlp_.inputs() << " hidden=" << mlp_.hidden()
    << " out=" << mlp_.outputs();
  return s.str();
}

Matrix CategoricalMlp::probabilities(ad::Tape& tape, ad::Var theta, const StepInput& in) const {
  return softmax_values(mlp_.forward(tape, theta, in));
}

ActionDraw CategoricalMlp::sample(ad::Tape& tape, ad::Var theta, const StepInput& in,
                                  Rng& rng) const {
  ad::Var logits = mlp_.forward(tape, theta, in);
  ad::Var log_probs = ad::log_softmax(logits);
  const std::size_t n = logits.cols();
  const std::size_t k = actions_.size();
  std::vector<double> probs(log_probs.value().begin(), log_probs.value().end());
  for (double& p : probs) p = std::exp(p);
  ActionDraw draw;
  draw.raw = Matrix(1, n);
  std::vector<std::size_t> idx(n);
  for (std::size_t m = 0; m < n; ++m) {
    idx[m] = sample_category(probs, n, m, k, rng);
    draw.raw(0, m) = static_cast<double>(idx[m]);
  }
  draw.action = action_of(draw.raw);
  draw.log_prob = ad::categorical_log_prob(logits, idx);
  return draw;
}

ad::Var CategoricalMlp::log_prob(ad::Tape& tape, ad::Var theta, const StepInput& in,
                                 const Matrix& raw) const {
  return ad::categorical_log_prob(mlp_.forward(tape, theta, in), indices_of(raw));
}

Matrix CategoricalMlp::action_of(const Matrix& raw) const {
  Matrix a(1, raw.cols);
  for (std::size_t m = 0; m < raw.cols; ++m) {
    a(0, m) = actions_.at(static_cast<std::size_t>(raw(0, m)));
  }
  return a;
}

// ---------------------------------------------------------------------------

GaussianMlp::GaussianMlp(std::vector<double> lower, std::vector<double> upper,
                         Normalizer normalizer, double last_layer_shrink, std::size_t hidden)
    : lower_(std::move(lower)),
      upper_(std::move(upper)),
      mlp_(normalizer.size(), hidden, 2 * lower_.size(), normalizer, last_layer_shrink) {
  if (lower_.empty() || lower_.size() != upper_.size()) {
    throw std::invalid_argument("gaussian policy: bad action bounds");
  }
  for (std::size_t i = 0; i < lower_.size(); ++i) {
    if (!(lower_[i] < upper_[i])) {
      throw std::invalid_argument("gaussian policy: lower bound must be below upper bound");
    }
  }
}

std::string GaussianMlp::architecture() const {
  std::ostringstream s;
  s << "gaussian-mlp in=" << mlp_.inputs() << " hidden=" << mlp_.hidden() << " dim=" << dim();
  return s.str();
}

GaussianMlp::Moments GaussianMlp::moments(ad::Tape& tape, ad::Var theta,
                                          const StepInput& in) const {
  ad::Var out = mlp_.forward(tape, theta, in);
  const std::size_t a = dim();
  const std::size_t n = out.cols();
  ad::Var mean = ad::view(out, 0, a, n);
  ad::Var spread = ad::view(out, a * n, a, n);
  if (!in.mean_shift.empty()) {
    if (in.mean_shift.size() != a) {
      throw std::invalid_argument("gaussian policy: mean shift has wrong dimension");
    }
    mean = mean + ad::concat_rows(in.mean_shift);
  }
  ad::Var std = ad::sqrt(ad::square(spread) + kVarianceFloor);
  return {mean, std};
}

ActionDraw GaussianMlp::sample(ad::Tape& tape, ad::Var theta, const StepInput& in,
                               Rng& rng) const {
  const Moments mo = moments(tape, theta, in);
  const std::size_t a = dim();
  const std::size_t n = mo.mean.cols();
  auto mean = mo.mean.value();
  auto std = mo.std.value();
  ActionDraw draw;
  draw.raw = Matrix(a, n);
  // Column-major draw order keeps one history's noise contiguous.
  for (std::size_t m = 0; m < n; ++m) {
    for (std::size_t i = 0; i < a; ++i) {
      draw.raw(i, m) = mean[i * n + m] + std[i * n + m] * standard_normal(rng);
    }
  }
  draw.action = action_of(draw.raw);
  draw.log_prob =
      ad::col_sum(ad::normal_log_density(tape.constant(draw.raw), mo.mean, mo.std));
  return draw;
}

ad::Var GaussianMlp::log_prob(ad::Tape& tape, ad::Var theta, const StepInput& in,
                              const Matrix& raw) const {
  const Moments mo = moments(tape, theta, in);
  return ad::col_sum(ad::normal_log_density(tape.constant(raw), mo.mean, mo.std));
}

Matrix GaussianMlp::action_of(const Matrix& raw) const {
  Matrix a = raw;
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t m = 0; m < a.cols; ++m) a(i, m) = std::clamp(a(i, m), lower_[i], upper_[i]);
  }
  return a;
}

// ---------------------------------------------------------------------------

TabularSoftmax::TabularSoftmax(std::vector<double> actions,
                               std::vector<std::vector<double>> anchors)
    : actions_(std::move(actions)), anchors_(std::move(anchors)) {
  if (actions_.empty() || anchors_.empty()) {
    throw std::invalid_argument("tabular policy: empty action or context set");
  }
  for (const auto& step : anchors_) {
    if (step.empty()) throw std::invalid_argument("tabular policy: step without contexts");
    first_context_.push_back(context_count_);
    context_count_ += step.size();
  }
}

std::string TabularSoftmax::architecture() const {
  std::ostringstream s;
  s << "tabular-softmax actions=" << actions_.size() << " contexts=" << context_count_;
  return s.str();
}

std::size_t TabularSoftmax::parameter_count() const { return actions_.size() * context_count_; }

std::vector<double> TabularSoftmax::initial_parameters(Rng&) const {
  return std::vector<double>(parameter_count(), 0.0);
}

std::size_t TabularSoftmax::context(int t, double s) const {
  if (t < 0 || static_cast<std::size_t>(t) >= anchors_.size()) {
    throw std::out_of_range("tabular policy: step outside the table");
  }
  const auto& step = anchors_[static_cast<std::size_t>(t)];
  std::size_t best = 0;
  for (std::size_t i = 1; i < step.size(); ++i) {
    if (std::fabs(step[i] - s) < std::fabs(step[best] - s)) best = i;
  }
  return first_context_[static_cast<std::size_t>(t)] + best;
}

ad::Var TabularSoftmax::logits(ad::Tape& tape, ad::Var theta, const StepInput& in) const {
  auto s = in.state.at(0).value();
  const std::size_t n = env::batch_of(in.state);
  Matrix one_hot(context_count_, n, 0.0);
  for (std::size_t m = 0; m < n; ++m) {
    one_hot(context(in.t, s[s.size() == 1 ? 0 : m]), m) = 1.0;
  }
  ad::Var table = ad::view(theta, 0, actions_.size(), context_count_);
  return ad::matmul(table, tape.constant(one_hot));
}

ActionDraw TabularSoftmax::sample(ad::Tape& tape, ad::Var theta, const StepInput& in,
                                  Rng& rng) const {
  ad::Var lg = logits(tape, theta, in);
  const std::size_t n = lg.cols();
  const Matrix probs = softmax_values(lg);
  ActionDraw draw;
  draw.raw = Matrix(1, n);
  std::vector<std::size_t> idx(n);
  for (std::size_t m = 0; m < n; ++m) {
    idx[m] = sample_category(probs.data, n, m, actions_.size(), rng);
    draw.raw(0, m) = static_cast<double>(idx[m]);
  }
  draw.action = action_of(draw.raw);
  draw.log_prob = ad::categorical_log_prob(lg, idx);
  return draw;
}

ad::Var TabularSoftmax::log_prob(ad::Tape& tape, ad::Var theta, const StepInput& in,
                                 const Matrix& raw) const {
  return ad::categorical_log_prob(logits(tape, theta, in), indices_of(raw));
}

Matrix TabularSoftmax::action_of(const Matrix& raw) const {
  Matrix a(1, raw.cols);
  for (std::size_t m = 0; m < raw.cols; ++m) {
    a(0, m) = actions_.at(static_cast<std::size_t>(raw(0, m)));
  }
  return a;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Policy> make_policy(const env::Environment& environment,
                                    bool condition_on_design) {
  const auto& d = environment.descriptor();
  // Design inputs are centered on Psi and divided by the optimizer scale.
  auto with_design = [&](Normalizer n) {
    if (!condition_on_design) return n;
    for (std::size_t i = 0; i < d.design_dim(); ++i) {
      n.mean.push_back(0.5 * (d.design_space.lower[i] + d.design_space.upper[i]));
      n.std.push_back(d.design_scale[i]);
    }
    return n;
  };
  if (d.name == "msd") {
    return std::make_unique<CategoricalMlp>(
        d.actions.values, with_design(Normalizer{{0.2, 0.0, 0.0}, {0.005, 0.02, 100.0}}));
  }
  if (d.name == "microgrid") {
    // Only the time input is scaled, by the horizon.
    Normalizer n{std::vector<double>(6, 0.0), std::vector<double>(6, 1.0)};
    n.std[5] = static_cast<double>(d.horizon);
    return std::make_unique<GaussianMlp>(d.actions.lower, d.actions.upper, with_design(n));
  }
  if (d.name == "drone") {
    Normalizer n{{0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0},
                 {0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.1, 0.1, 0.1, 1, 1, 0.1, 100}};
    return std::make_unique<GaussianMlp>(d.actions.lower, d.actions.upper, with_design(n), 30.0);
  }
  if (d.name == "toy") {
    if (condition_on_design) {
      throw std::invalid_argument("the toy policy cannot be conditioned on the design");
    }
    return make_toy_policy();
  }
  throw std::invalid_argument("no default policy for environment '" + d.name + "'");
}

std::unique_ptr<TabularSoftmax> make_toy_policy() {
  return std::make_unique<TabularSoftmax>(std::vector<double>{0.0, 1.0},
                                          std::vector<std::vector<double>>{
                                              {0.0}, {-0.1, 0.1, 0.9, 1.1}});
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kMagic = "depslab-policy 1";

void write_doubles(std::ostream& out, std::span<const double> values) {
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
}

std::vector<double> read_doubles(std::istream& in, std::size_t count) {
  std::vector<double> values(count);
  for (auto& v : values) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
      throw std::runtime_error("checkpoint: truncated parameter block");
    }
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    v = std::bit_cast<double>(bits);
  }
  return values;
}

std::string header_value(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(key + " ", 0) != 0) {
    throw std::runtime_error("checkpoint: expected '" + key + "' line");
  }
  return line.substr(key.size() + 1);
}

std::vector<double> parse_list(const std::string& text) {
  std::istringstream s(text);
  std::vector<double> out;
  double v = 0.0;
  while (s >> v) out.push_back(v);
  return out;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << kMagic << '\n';
  out << "architecture " << checkpoint.architecture << '\n';
  out.precision(17);
  out << "mean";
  for (double v : checkpoint.normalizer.mean) out << ' ' << v;
  out << "\nstd";
  for (double v : checkpoint.normalizer.std) out << ' ' << v;
  out << "\nparams " << checkpoint.theta.size() << '\n';
  write_doubles(out, checkpoint.theta);
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw std::runtime_error(path + ": not a policy checkpoint");
  }
  Checkpoint c;
  c.architecture = header_value(in, "architecture");
  // Empty lists are written without a trailing space.
  auto list_line = [&](const std::string& key) {
    if (!std::getline(in, line) || line.rfind(key, 0) != 0) {
      throw std::runtime_error("checkpoint: expected '" + key + "' line");
    }
    return parse_list(line.substr(key.size()));
  };
  c.normalizer.mean = list_line("mean");
  c.normalizer.std = list_line("std");
  const std::size_t count = std::stoul(header_value(in, "params"));
  c.theta = read_doubles(in, count);
  return c;
}

}  // namespace depslab::policy
