#ifndef DHN_AUTODIFF_HPP
#define DHN_AUTODIFF_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "dhn/errors.hpp"

namespace dhn::ad {

class Tape;

// A float64 value plus a handle into the active tape. node < 0 marks a
// constant: constants carry no gradient and record nothing. All arithmetic
// on constants folds, so the same model code serves both the training pass
// (tracked parameters) and tape-free inference (everything constant).
struct Var {
  double value = 0.0;
  std::int32_t node = -1;

  bool tracked() const { return node >= 0; }
};

inline Var constant(double v) { return Var{v, -1}; }

// Reverse-mode tape: an append-only list of nodes in topological order, each
// holding edges (parent node, local partial) with partials evaluated during
// the forward pass. The backward sweep visits each node exactly once.
//
// One tape per thread; a tape is made current with TapeGuard and rebuilt per
// minibatch. checkpoint()/rewind() let a batch keep its mounted parameter
// leaves while discarding per-row forward graphs.
class Tape {
 public:
  Var leaf(double value);
  std::vector<Var> leaves(std::span<const double> values);

  // Computes d(loss)/d(node) for every node up to loss. Adjoints are reset
  // first, so repeated calls give identical results.
  void backward(Var loss);

  double adjoint(Var v) const;

  void checkpoint();
  void rewind();  // drop everything appended after the last checkpoint
  void clear();

  std::size_t node_count() const { return edge_start_.size(); }

  static Tape* active();

 private:
  friend struct TapeGuard;
  friend class NodeBuilder;

  std::int32_t begin_node();

  std::vector<std::uint32_t> edge_start_;   // per node: first edge index
  std::vector<std::uint32_t> edge_count_;   // per node: number of edges
  std::vector<std::int32_t> edge_parent_;
  std::vector<double> edge_partial_;
  std::vector<double> adjoint_;
  std::size_t checkpoint_nodes_ = 0;
  std::size_t checkpoint_edges_ = 0;
};

// Installs a tape as the current thread's active tape for its scope.
struct TapeGuard {
  explicit TapeGuard(Tape& t);
  ~TapeGuard();
  TapeGuard(const TapeGuard&) = delete;
  TapeGuard& operator=(const TapeGuard&) = delete;

 private:
  Tape* previous_;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);

inline Var operator+(Var a, double b) { return a + constant(b); }
inline Var operator+(double a, Var b) { return constant(a) + b; }
inline Var operator-(Var a, double b) { return a - constant(b); }
inline Var operator-(double a, Var b) { return constant(a) - b; }
inline Var operator*(Var a, double b) { return a * constant(b); }
inline Var operator*(double a, Var b) { return constant(a) * b; }
inline Var operator/(Var a, double b) { return a / constant(b); }
inline Var operator/(double a, Var b) { return constant(a) / b; }

Var exp(Var x);
Var log(Var x);    // requires x > 0
Var log1p(Var x);  // requires x > -1
Var sqrt(Var x);   // requires x >= 0
Var abs(Var x);    // subgradient 0 at x == 0
Var relu(Var x);   // relu'(0) defined as 0
Var square(Var x);
Var norm_cdf(Var x);
Var norm_log_cdf(Var x);
Var softplus(Var x);  // log(1 + exp(x)), overflow-safe

/// sum_i w_i * x_i + bias as a single n-ary node.
Var dot_affine(std::span<const Var> w, std::span<const Var> x, Var bias);

Var sum(std::span<const Var> xs);

/// log((1/k) * sum exp(v_i)) with softmax partials, max-shifted.
Var log_sum_exp_mean(std::span<const Var> xs);

}  // namespace dhn::ad

#endif
