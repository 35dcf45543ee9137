#include "dhn/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "dhn/probability.hpp"

namespace dhn::ad {

namespace {

thread_local Tape* t_active = nullptr;

[[noreturn]] void no_tape_error() {
  throw UsageError("autodiff: operation on a tracked value with no active tape");
}

void check_finite_domain(double v, const char* op) {
  if (!std::isfinite(v)) {
    throw NumericalError(std::string("autodiff: ") + op + " produced a non-finite value");
  }
}

}  // namespace

Tape* Tape::active() { return t_active; }

TapeGuard::TapeGuard(Tape& t) : previous_(t_active) { t_active = &t; }
TapeGuard::~TapeGuard() { t_active = previous_; }

std::int32_t Tape::begin_node() {
  edge_start_.push_back(static_cast<std::uint32_t>(edge_parent_.size()));
  edge_count_.push_back(0);
  return static_cast<std::int32_t>(edge_start_.size()) - 1;
}

Var Tape::leaf(double value) { return Var{value, begin_node()}; }

std::vector<Var> Tape::leaves(std::span<const double> values) {
  std::vector<Var> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(leaf(v));
  return out;
}

void Tape::checkpoint() {
  checkpoint_nodes_ = edge_start_.size();
  checkpoint_edges_ = edge_parent_.size();
}

void Tape::rewind() {
  edge_start_.resize(checkpoint_nodes_);
  edge_count_.resize(checkpoint_nodes_);
  edge_parent_.resize(checkpoint_edges_);
  edge_partial_.resize(checkpoint_edges_);
}

void Tape::clear() {
  edge_start_.clear();
  edge_count_.clear();
  edge_parent_.clear();
  edge_partial_.clear();
  adjoint_.clear();
  checkpoint_nodes_ = 0;
  checkpoint_edges_ = 0;
}

void Tape::backward(Var loss) {
  if (!loss.tracked() || loss.node >= static_cast<std::int32_t>(edge_start_.size())) {
    throw UsageError("autodiff: backward() loss is not on the tape");
  }
  adjoint_.assign(edge_start_.size(), 0.0);
  adjoint_[loss.node] = 1.0;
  for (std::int32_t i = loss.node; i >= 0; --i) {
    const double a = adjoint_[i];
    if (a == 0.0) continue;
    const std::uint32_t first = edge_start_[i];
    const std::uint32_t n = edge_count_[i];
    for (std::uint32_t e = first; e < first + n; ++e) {
      adjoint_[edge_parent_[e]] += edge_partial_[e] * a;
    }
  }
}

double Tape::adjoint(Var v) const {
  if (!v.tracked()) return 0.0;
  if (v.node >= static_cast<std::int32_t>(adjoint_.size())) return 0.0;
  return adjoint_[v.node];
}

// Appends a node with edges for the tracked operands only.
class NodeBuilder {
 public:
  explicit NodeBuilder(Tape& t) : tape_(t), node_(t.begin_node()) {}

  void edge(Var parent, double partial) {
    if (!parent.tracked()) return;
    tape_.edge_parent_.push_back(parent.node);
    tape_.edge_partial_.push_back(partial);
    ++tape_.edge_count_[node_];
  }

  Var finish(double value) const { return Var{value, node_}; }

 private:
  Tape& tape_;
  std::int32_t node_;
};

namespace {

inline Var unary(Var x, double value, double partial) {
  Tape* t = t_active;
  if (!x.tracked()) return constant(value);
  if (!t) no_tape_error();
  NodeBuilder nb(*t);
  nb.edge(x, partial);
  return nb.finish(value);
}

inline Var binary(Var a, Var b, double value, double da, double db) {
  if (!a.tracked() && !b.tracked()) return constant(value);
  Tape* t = t_active;
  if (!t) no_tape_error();
  NodeBuilder nb(*t);
  nb.edge(a, da);
  nb.edge(b, db);
  return nb.finish(value);
}

}  // namespace

Var operator+(Var a, Var b) { return binary(a, b, a.value + b.value, 1.0, 1.0); }
Var operator-(Var a, Var b) { return binary(a, b, a.value - b.value, 1.0, -1.0); }
Var operator*(Var a, Var b) { return binary(a, b, a.value * b.value, b.value, a.value); }

Var operator/(Var a, Var b) {
  const double inv = 1.0 / b.value;
  return binary(a, b, a.value * inv, inv, -a.value * inv * inv);
}

Var operator-(Var a) { return unary(a, -a.value, -1.0); }

Var exp(Var x) {
  const double v = std::exp(x.value);
  return unary(x, v, v);
}

Var log(Var x) {
  if (!(x.value > 0.0)) throw NumericalError("autodiff: log of non-positive value");
  return unary(x, std::log(x.value), 1.0 / x.value);
}

Var log1p(Var x) {
  if (!(x.value > -1.0)) throw NumericalError("autodiff: log1p of value <= -1");
  return unary(x, std::log1p(x.value), 1.0 / (1.0 + x.value));
}

Var sqrt(Var x) {
  if (!(x.value >= 0.0)) throw NumericalError("autodiff: sqrt of negative value");
  const double v = std::sqrt(x.value);
  return unary(x, v, 0.5 / v);
}

Var abs(Var x) {
  const double s = x.value > 0.0 ? 1.0 : (x.value < 0.0 ? -1.0 : 0.0);
  return unary(x, std::abs(x.value), s);
}

Var relu(Var x) {
  return unary(x, x.value > 0.0 ? x.value : 0.0, x.value > 0.0 ? 1.0 : 0.0);
}

Var square(Var x) { return unary(x, x.value * x.value, 2.0 * x.value); }

Var norm_cdf(Var x) {
  check_finite_domain(x.value, "norm_cdf");
  return unary(x, prob::std_normal_cdf(x.value), prob::std_normal_pdf(x.value));
}

Var norm_log_cdf(Var x) {
  const double v = prob::std_normal_log_cdf(x.value);
  return unary(x, v, prob::std_normal_log_cdf_grad(x.value));
}

Var softplus(Var x) {
  if (x.value > 0.0) return x + log1p(exp(-x));
  return log1p(exp(x));
}

Var dot_affine(std::span<const Var> w, std::span<const Var> x, Var bias) {
  if (w.size() != x.size()) throw UsageError("dot_affine: length mismatch");
  double value = bias.value;
  bool any_tracked = bias.tracked();
  for (std::size_t i = 0; i < w.size(); ++i) {
    value += w[i].value * x[i].value;
    any_tracked = any_tracked || w[i].tracked() || x[i].tracked();
  }
  if (!any_tracked) return constant(value);
  Tape* t = t_active;
  if (!t) no_tape_error();
  NodeBuilder nb(*t);
  for (std::size_t i = 0; i < w.size(); ++i) {
    nb.edge(w[i], x[i].value);
    nb.edge(x[i], w[i].value);
  }
  nb.edge(bias, 1.0);
  return nb.finish(value);
}

Var sum(std::span<const Var> xs) {
  double value = 0.0;
  bool any_tracked = false;
  for (Var v : xs) {
    value += v.value;
    any_tracked = any_tracked || v.tracked();
  }
  if (!any_tracked) return constant(value);
  Tape* t = t_active;
  if (!t) no_tape_error();
  NodeBuilder nb(*t);
  for (Var v : xs) nb.edge(v, 1.0);
  return nb.finish(value);
}

Var log_sum_exp_mean(std::span<const Var> xs) {
  if (xs.empty()) throw UsageError("log_sum_exp_mean: empty input");
  double m = xs[0].value;
  bool any_tracked = false;
  for (Var v : xs) {
    m = std::max(m, v.value);
    any_tracked = any_tracked || v.tracked();
  }
  double total = 0.0;
  for (Var v : xs) total += std::exp(v.value - m);
  const double value = m + std::log(total / static_cast<double>(xs.size()));
  if (!any_tracked) return constant(value);
  Tape* t = t_active;
  if (!t) no_tape_error();
  NodeBuilder nb(*t);
  for (Var v : xs) nb.edge(v, std::exp(v.value - m) / total);
  return nb.finish(value);
}

}  // namespace dhn::ad
