#ifndef DHN_LAYERS_HPP
#define DHN_LAYERS_HPP

#include <span>
#include <string>
#include <vector>

#include "dhn/autodiff.hpp"
#include "dhn/rng.hpp"

namespace dhn {

enum class Activation { relu, identity };

// A fully connected layer's persistent parameters. Weights are row-major
// (out x in); initialization is uniform(+-sqrt(6/(fan_in+fan_out))), biases 0.
struct DenseLayer {
  int in = 0;
  int out = 0;
  Activation act = Activation::identity;
  std::vector<double> w;
  std::vector<double> b;

  static DenseLayer init(int in, int out, Activation act, prob::RngStream& rng);
};

// A layer mounted onto the active tape (or as constants when tape-free):
// the Vars mirror the double parameters for one forward/backward build.
struct MountedLayer {
  int in = 0;
  int out = 0;
  Activation act = Activation::identity;
  std::vector<ad::Var> w;
  std::vector<ad::Var> b;
};

MountedLayer mount(const DenseLayer& layer, ad::Tape* tape);

/// activation(W x + b). Throws UsageError on input width mismatch.
std::vector<ad::Var> forward_dense(const MountedLayer& layer, std::span<const ad::Var> x);

using Mlp = std::vector<DenseLayer>;
using MountedMlp = std::vector<MountedLayer>;

MountedMlp mount(const Mlp& mlp, ad::Tape* tape);
std::vector<ad::Var> forward_mlp(const MountedMlp& mlp, std::span<const ad::Var> x);

// --- optimizer ---

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double decay = 0.0;  // inverse-time decay: lr_t = lr / (1 + decay * t)
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// A named view of one trainable parameter vector inside the model.
struct ParamGroup {
  std::string name;
  std::vector<double>* values = nullptr;
};

// Per-group gradients, aligned with the model's param_groups() order.
using Grads = std::vector<std::vector<double>>;

class Optimizer {
 public:
  explicit Optimizer(const OptimizerConfig& cfg) : cfg_(cfg) {}

  /// One update step, in place. Throws NumericalError on a non-finite
  /// gradient, naming the parameter and the step index.
  void step(std::span<const ParamGroup> groups, const Grads& grads);

  long long steps_taken() const { return step_count_; }

 private:
  OptimizerConfig cfg_;
  long long step_count_ = 0;
  std::vector<std::vector<double>> m_;  // adam first moments, one per group
  std::vector<std::vector<double>> v_;  // adam second moments
};

}  // namespace dhn

#endif
