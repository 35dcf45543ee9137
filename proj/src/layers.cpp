#include "dhn/layers.hpp"

#include <cmath>
#include <string>

#include "dhn/errors.hpp"

namespace dhn {

DenseLayer DenseLayer::init(int in, int out, Activation act, prob::RngStream& rng) {
  if (in < 1 || out < 1) throw UsageError("DenseLayer: dimensions must be positive");
  DenseLayer l;
  l.in = in;
  l.out = out;
  l.act = act;
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  l.w.resize(static_cast<std::size_t>(in) * out);
  for (double& wi : l.w) wi = (2.0 * rng.uniform() - 1.0) * bound;
  l.b.assign(static_cast<std::size_t>(out), 0.0);
  return l;
}

MountedLayer mount(const DenseLayer& layer, ad::Tape* tape) {
  MountedLayer m;
  m.in = layer.in;
  m.out = layer.out;
  m.act = layer.act;
  if (tape) {
    m.w = tape->leaves(layer.w);
    m.b = tape->leaves(layer.b);
  } else {
    m.w.reserve(layer.w.size());
    for (double v : layer.w) m.w.push_back(ad::constant(v));
    m.b.reserve(layer.b.size());
    for (double v : layer.b) m.b.push_back(ad::constant(v));
  }
  return m;
}

std::vector<ad::Var> forward_dense(const MountedLayer& layer, std::span<const ad::Var> x) {
  if (static_cast<int>(x.size()) != layer.in) {
    throw UsageError("forward_dense: input width " + std::to_string(x.size()) +
                     " does not match layer input dimension " + std::to_string(layer.in));
  }
  std::vector<ad::Var> y;
  y.reserve(static_cast<std::size_t>(layer.out));
  for (int i = 0; i < layer.out; ++i) {
    std::span<const ad::Var> row{layer.w.data() + static_cast<std::size_t>(i) * layer.in,
                                 static_cast<std::size_t>(layer.in)};
    ad::Var z = ad::dot_affine(row, x, layer.b[i]);
    y.push_back(layer.act == Activation::relu ? ad::relu(z) : z);
  }
  return y;
}

MountedMlp mount(const Mlp& mlp, ad::Tape* tape) {
  MountedMlp m;
  m.reserve(mlp.size());
  for (const DenseLayer& l : mlp) m.push_back(mount(l, tape));
  return m;
}

std::vector<ad::Var> forward_mlp(const MountedMlp& mlp, std::span<const ad::Var> x) {
  std::vector<ad::Var> h(x.begin(), x.end());
  for (const MountedLayer& l : mlp) h = forward_dense(l, h);
  return h;
}

void Optimizer::step(std::span<const ParamGroup> groups, const Grads& grads) {
  if (grads.size() != groups.size()) throw UsageError("Optimizer::step: group count mismatch");
  ++step_count_;
  const double lr = cfg_.learning_rate / (1.0 + cfg_.decay * static_cast<double>(step_count_ - 1));

  if (cfg_.kind == OptimizerKind::adam && m_.empty()) {
    m_.resize(groups.size());
    v_.resize(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
      m_[g].assign(groups[g].values->size(), 0.0);
      v_[g].assign(groups[g].values->size(), 0.0);
    }
  }

  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::vector<double>& p = *groups[g].values;
    const std::vector<double>& grad = grads[g];
    if (grad.size() != p.size()) {
      throw UsageError("Optimizer::step: gradient size mismatch for " + groups[g].name);
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!std::isfinite(grad[i])) {
        throw NumericalError("Optimizer::step: non-finite gradient for " + groups[g].name + "[" +
                             std::to_string(i) + "] at step " + std::to_string(step_count_));
      }
      if (cfg_.kind == OptimizerKind::sgd) {
        p[i] -= lr * grad[i];
      } else {
        double& m = m_[g][i];
        double& v = v_[g][i];
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * grad[i];
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * grad[i] * grad[i];
        const double mhat = m / (1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_)));
        const double vhat = v / (1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_)));
        p[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
      }
    }
  }
}

}  // namespace dhn
