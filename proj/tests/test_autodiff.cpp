#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "dhn/autodiff.hpp"
#include "dhn/errors.hpp"
#include "dhn/layers.hpp"
#include "dhn/probability.hpp"
#include "support.hpp"

using namespace dhn;
using dhn::testing::central_diff;
using dhn::testing::grad_close;

namespace {

// d/dx of a unary primitive via the tape, at x.
double ad_grad(const std::function<ad::Var(ad::Var)>& op, double x) {
  ad::Tape tape;
  ad::TapeGuard guard(tape);
  ad::Var v = tape.leaf(x);
  ad::Var y = op(v);
  tape.backward(y);
  return tape.adjoint(v);
}

double fd_grad(const std::function<ad::Var(ad::Var)>& op, double x, double h = 1e-5) {
  return central_diff([&](double t) { return op(ad::constant(t)).value; }, x, h);
}

void check_unary_primitive(const char* name, const std::function<ad::Var(ad::Var)>& op,
                           double lo, double hi) {
  prob::RngStream rng(2024);
  for (int i = 0; i < 100; ++i) {
    const double x = lo + (hi - lo) * rng.uniform();
    const double a = ad_grad(op, x);
    const double b = fd_grad(op, x);
    INFO(name, " at x = ", x, ": ad ", a, " fd ", b);
    CHECK(grad_close(a, b, 1e-4, 1e-9));
  }
}

}  // namespace

TEST_CASE("unary primitive gradients match central finite differences") {
  check_unary_primitive("exp", [](ad::Var x) { return ad::exp(x); }, -3.0, 3.0);
  check_unary_primitive("log", [](ad::Var x) { return ad::log(x); }, 0.05, 10.0);
  check_unary_primitive("log1p", [](ad::Var x) { return ad::log1p(x); }, -0.8, 5.0);
  check_unary_primitive("sqrt", [](ad::Var x) { return ad::sqrt(x); }, 0.05, 9.0);
  check_unary_primitive("norm_cdf", [](ad::Var x) { return ad::norm_cdf(x); }, -4.0, 4.0);
  check_unary_primitive("norm_log_cdf", [](ad::Var x) { return ad::norm_log_cdf(x); }, -20.0, 6.0);
  check_unary_primitive("softplus", [](ad::Var x) { return ad::softplus(x); }, -20.0, 20.0);
  // relu away from the kink; the kink itself is pinned below.
  check_unary_primitive("relu+", [](ad::Var x) { return ad::relu(x); }, 0.01, 5.0);
  check_unary_primitive("relu-", [](ad::Var x) { return ad::relu(x); }, -5.0, -0.01);
  check_unary_primitive("abs+", [](ad::Var x) { return ad::abs(x); }, 0.01, 5.0);
  check_unary_primitive("abs-", [](ad::Var x) { return ad::abs(x); }, -5.0, -0.01);
}

TEST_CASE("binary primitive gradients match central finite differences") {
  prob::RngStream rng(7);
  auto check_binary = [&](const char* name,
                          const std::function<ad::Var(ad::Var, ad::Var)>& op, bool avoid_zero_b) {
    for (int i = 0; i < 100; ++i) {
      double a = 6.0 * rng.uniform() - 3.0;
      double b = 6.0 * rng.uniform() - 3.0;
      if (avoid_zero_b && std::abs(b) < 0.3) b += b < 0 ? -0.3 : 0.3;
      ad::Tape tape;
      ad::TapeGuard guard(tape);
      ad::Var va = tape.leaf(a);
      ad::Var vb = tape.leaf(b);
      tape.backward(op(va, vb));
      const double ga = tape.adjoint(va);
      const double gb = tape.adjoint(vb);
      const double fa =
          central_diff([&](double t) { return op(ad::constant(t), ad::constant(b)).value; }, a);
      const double fb =
          central_diff([&](double t) { return op(ad::constant(a), ad::constant(t)).value; }, b);
      INFO(name, " at (", a, ",", b, ")");
      CHECK(grad_close(ga, fa, 1e-4, 1e-9));
      CHECK(grad_close(gb, fb, 1e-4, 1e-9));
    }
  };
  check_binary("add", [](ad::Var a, ad::Var b) { return a + b; }, false);
  check_binary("sub", [](ad::Var a, ad::Var b) { return a - b; }, false);
  check_binary("mul", [](ad::Var a, ad::Var b) { return a * b; }, false);
  check_binary("div", [](ad::Var a, ad::Var b) { return a / b; }, true);
}

TEST_CASE("dot_affine (matmul primitive) gradients") {
  prob::RngStream rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_u64() % 6);
    std::vector<double> w(n);
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) {
      w[i] = rng.normal();
      x[i] = rng.normal();
    }
    const double b = rng.normal();
    ad::Tape tape;
    ad::TapeGuard guard(tape);
    std::vector<ad::Var> wv = tape.leaves(w);
    std::vector<ad::Var> xv = tape.leaves(x);
    ad::Var bv = tape.leaf(b);
    tape.backward(ad::dot_affine(wv, xv, bv));
    for (int i = 0; i < n; ++i) {
      CHECK(grad_close(tape.adjoint(wv[i]), x[i], 1e-10, 1e-12));
      CHECK(grad_close(tape.adjoint(xv[i]), w[i], 1e-10, 1e-12));
    }
    CHECK(tape.adjoint(bv) == doctest::Approx(1.0));
  }
}

TEST_CASE("log_sum_exp_mean gradients are softmax weights") {
  prob::RngStream rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 8);
    std::vector<double> v(n);
    for (double& x : v) x = 4.0 * rng.normal();
    ad::Tape tape;
    ad::TapeGuard guard(tape);
    std::vector<ad::Var> vv = tape.leaves(v);
    tape.backward(ad::log_sum_exp_mean(vv));
    for (int i = 0; i < n; ++i) {
      const double fd = central_diff(
          [&](double t) {
            std::vector<double> shifted = v;
            shifted[i] = t;
            return prob::log_sum_exp_mean(shifted);
          },
          v[i]);
      CHECK(grad_close(tape.adjoint(vv[i]), fd, 1e-4, 1e-9));
    }
  }
}

TEST_CASE("relu subgradient at zero is zero") {
  ad::Tape tape;
  ad::TapeGuard guard(tape);
  ad::Var x = tape.leaf(0.0);
  tape.backward(ad::relu(x));
  CHECK(tape.adjoint(x) == 0.0);
}

TEST_CASE("backward pinned cases") {
  SUBCASE("d(x^2)/dx at 3 is 6") {
    ad::Tape tape;
    ad::TapeGuard guard(tape);
    ad::Var x = tape.leaf(3.0);
    tape.backward(x * x);
    CHECK(tape.adjoint(x) == doctest::Approx(6.0).epsilon(1e-14));
  }
  SUBCASE("d log Phi(x)/dx at 0 is 2 phi(0)") {
    ad::Tape tape;
    ad::TapeGuard guard(tape);
    ad::Var x = tape.leaf(0.0);
    tape.backward(ad::norm_log_cdf(x));
    CHECK(tape.adjoint(x) == doctest::Approx(0.7978845608028654).epsilon(1e-12));
  }
  SUBCASE("disconnected parameter gets exactly zero") {
    ad::Tape tape;
    ad::TapeGuard guard(tape);
    ad::Var x = tape.leaf(1.5);
    ad::Var unused = tape.leaf(2.5);
    tape.backward(ad::exp(x));
    CHECK(tape.adjoint(unused) == 0.0);
  }
  SUBCASE("two backward passes agree bitwise") {
    ad::Tape tape;
    ad::TapeGuard guard(tape);
    ad::Var x = tape.leaf(0.7);
    ad::Var y = tape.leaf(-1.2);
    ad::Var loss = ad::exp(x * y) + ad::norm_log_cdf(x - y);
    tape.backward(loss);
    const double gx = tape.adjoint(x);
    const double gy = tape.adjoint(y);
    tape.backward(loss);
    CHECK(tape.adjoint(x) == gx);
    CHECK(tape.adjoint(y) == gy);
  }
  SUBCASE("loss must live on the tape") {
    ad::Tape tape;
    CHECK_THROWS_AS(tape.backward(ad::constant(1.0)), UsageError);
  }
}

TEST_CASE("tape checkpoint and rewind preserve parameter leaves") {
  ad::Tape tape;
  ad::TapeGuard guard(tape);
  ad::Var p = tape.leaf(2.0);
  tape.checkpoint();
  {
    tape.rewind();
    tape.backward(p * p);
    CHECK(tape.adjoint(p) == doctest::Approx(4.0));
  }
  {
    tape.rewind();
    tape.backward(ad::exp(p));
    CHECK(tape.adjoint(p) == doctest::Approx(std::exp(2.0)));
  }
}

TEST_CASE("operations on tracked values require an active tape") {
  ad::Tape tape;
  ad::Var x;
  {
    ad::TapeGuard guard(tape);
    x = tape.leaf(1.0);
  }
  CHECK_THROWS_AS((void)(x * x), UsageError);
  // Constants fold without any tape.
  CHECK((ad::constant(2.0) * ad::constant(3.0)).value == 6.0);
  CHECK(!(ad::constant(2.0) * ad::constant(3.0)).tracked());
}

TEST_CASE("forward_dense") {
  SUBCASE("identity weights with relu clamp") {
    DenseLayer layer;
    layer.in = 2;
    layer.out = 2;
    layer.act = Activation::relu;
    layer.w = {1, 0, 0, 1};
    layer.b = {0, 0};
    const MountedLayer m = mount(layer, nullptr);
    const std::vector<ad::Var> x{ad::constant(1.0), ad::constant(-1.0)};
    const std::vector<ad::Var> y = forward_dense(m, x);
    CHECK(y[0].value == doctest::Approx(1.0));
    CHECK(y[1].value == doctest::Approx(0.0));
  }
  SUBCASE("affine arithmetic") {
    DenseLayer layer;
    layer.in = 1;
    layer.out = 1;
    layer.act = Activation::identity;
    layer.w = {2.0};
    layer.b = {3.0};
    const MountedLayer m = mount(layer, nullptr);
    const std::vector<ad::Var> y = forward_dense(m, {{ad::constant(5.0)}});
    CHECK(y[0].value == doctest::Approx(13.0));
  }
  SUBCASE("dimension mismatch is a configuration error") {
    DenseLayer layer;
    layer.in = 2;
    layer.out = 1;
    layer.act = Activation::identity;
    layer.w = {1, 1};
    layer.b = {0};
    const MountedLayer m = mount(layer, nullptr);
    CHECK_THROWS_AS(forward_dense(m, {{ad::constant(1.0)}}), UsageError);
  }
  SUBCASE("gradient of summed outputs w.r.t. W matches finite differences") {
    prob::RngStream rng(3);
    DenseLayer layer = DenseLayer::init(2, 3, Activation::relu, rng);
    const std::vector<double> x{0.3, -0.8};

    auto eval = [&](const DenseLayer& l) {
      const MountedLayer m = mount(l, nullptr);
      std::vector<ad::Var> xv{ad::constant(x[0]), ad::constant(x[1])};
      double s = 0.0;
      for (ad::Var v : forward_dense(m, xv)) s += v.value;
      return s;
    };

    ad::Tape tape;
    ad::TapeGuard guard(tape);
    const MountedLayer m = mount(layer, &tape);
    std::vector<ad::Var> xv{ad::constant(x[0]), ad::constant(x[1])};
    const std::vector<ad::Var> y = forward_dense(m, xv);
    tape.backward(ad::sum(y));

    for (std::size_t i = 0; i < layer.w.size(); ++i) {
      DenseLayer probe = layer;
      const double fd = central_diff(
          [&](double t) {
            probe.w[i] = t;
            return eval(probe);
          },
          layer.w[i]);
      CHECK(grad_close(tape.adjoint(m.w[i]), fd, 1e-6, 1e-10));
    }
    for (std::size_t i = 0; i < layer.b.size(); ++i) {
      DenseLayer probe = layer;
      const double fd = central_diff(
          [&](double t) {
            probe.b[i] = t;
            return eval(probe);
          },
          layer.b[i]);
      CHECK(grad_close(tape.adjoint(m.b[i]), fd, 1e-6, 1e-10));
    }
  }
}

TEST_CASE("optimizer steps") {
  SUBCASE("sgd single step") {
    std::vector<double> p{1.0};
    std::vector<ParamGroup> groups{{"p", &p}};
    Optimizer opt(OptimizerConfig{OptimizerKind::sgd, 0.1});
    opt.step(groups, {{2.0}});
    CHECK(p[0] == doctest::Approx(0.8).epsilon(1e-15));
  }
  SUBCASE("adam first step moves by ~lr") {
    std::vector<double> p{0.0};
    std::vector<ParamGroup> groups{{"p", &p}};
    Optimizer opt(OptimizerConfig{});  // adam, lr 1e-3, betas (0.9, 0.999), eps 1e-8
    opt.step(groups, {{1.0}});
    CHECK(p[0] == doctest::Approx(-0.001).epsilon(1e-7));
    CHECK(std::abs(p[0] + 0.001 / (1.0 + 1e-8)) < 1e-15);
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    std::vector<double> p{1.25, -0.5};
    std::vector<ParamGroup> groups{{"p", &p}};
    Optimizer sgd(OptimizerConfig{OptimizerKind::sgd, 0.5});
    sgd.step(groups, {{0.0, 0.0}});
    CHECK(p[0] == 1.25);
    CHECK(p[1] == -0.5);
    Optimizer adam(OptimizerConfig{});
    adam.step(groups, {{0.0, 0.0}});
    CHECK(p[0] == 1.25);
    CHECK(p[1] == -0.5);
  }
  SUBCASE("non-finite gradient names the parameter and step") {
    std::vector<double> p{1.0};
    std::vector<ParamGroup> groups{{"theta", &p}};
    Optimizer opt(OptimizerConfig{OptimizerKind::sgd, 0.1});
    CHECK_THROWS_WITH_AS(opt.step(groups, {{std::nan("")}}),
                         doctest::Contains("theta[0] at step 1"), NumericalError);
  }
  SUBCASE("inverse-time decay shrinks steps") {
    std::vector<double> p{0.0};
    std::vector<ParamGroup> groups{{"p", &p}};
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::sgd;
    cfg.learning_rate = 1.0;
    cfg.decay = 1.0;
    Optimizer opt(cfg);
    opt.step(groups, {{1.0}});  // lr = 1
    CHECK(p[0] == doctest::Approx(-1.0));
    opt.step(groups, {{1.0}});  // lr = 1/2
    CHECK(p[0] == doctest::Approx(-1.5));
  }
}
