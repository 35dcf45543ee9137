#include "dhn/probability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dhn::prob {

namespace {
constexpr double kInvSqrt2 = 0.707106781186547524400844362105;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 6.283185307179586476925286766559 * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

long long RngStream::poisson(double lambda) {
  if (!(lambda >= 0.0)) throw NumericalError("poisson: rate must be nonnegative");
  long long total = 0;
  // Knuth's product method per chunk; chunks keep exp(-rate) well away from
  // the underflow threshold.
  while (lambda > 0.0) {
    const double chunk = std::min(lambda, 30.0);
    lambda -= chunk;
    const double limit = std::exp(-chunk);
    long long k = -1;
    double prod = 1.0;
    do {
      prod *= uniform();
      ++k;
    } while (prod > limit);
    total += k;
  }
  return total;
}

double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x - kHalfLogTwoPi);
}

double std_normal_cdf(double x) {
  return 0.5 * std::erfc(-x * kInvSqrt2);
}

double std_normal_log_cdf(double x) {
  if (!(std::abs(x) <= 40.0)) {
    throw NumericalError("std_normal_log_cdf: argument " + std::to_string(x) +
                         " outside domain |x| <= 40 (likely divergence)");
  }
  if (x > 5.0) {
    // log(1 - Phi(-x)); Phi(-x) is tiny so log1p keeps full precision.
    return std::log1p(-std_normal_cdf(-x));
  }
  if (x >= -20.0) {
    return std::log(std_normal_cdf(x));
  }
  // Asymptotic tail: Phi(x) = phi(x)/(-x) * [1 - 1/x^2 + 3/x^4 - ...].
  // The alternating series is summed until it stops changing, which happens
  // well before it starts diverging for |x| >= 20.
  const double x2 = x * x;
  double term = 1.0;
  double sum = 1.0;
  double last = 0.0;
  long long i = 0;
  while (std::abs(sum - last) > std::numeric_limits<double>::epsilon() * std::abs(sum)) {
    last = sum;
    ++i;
    term *= -static_cast<double>(2 * i - 1) / x2;
    sum += term;
  }
  return -0.5 * x2 - std::log(-x) - kHalfLogTwoPi + std::log(sum);
}

double std_normal_log_cdf_grad(double x) {
  const double log_pdf = -0.5 * x * x - kHalfLogTwoPi;
  return std::exp(log_pdf - std_normal_log_cdf(x));
}

double log_sum_exp_mean(std::span<const double> values) {
  if (values.empty()) throw UsageError("log_sum_exp_mean: empty input");
  double m = values[0];
  for (double v : values) m = std::max(m, v);
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s / static_cast<double>(values.size()));
}

CholeskyFactor cholesky(std::span<const double> sym, int n) {
  if (static_cast<int>(sym.size()) != n * n) throw UsageError("cholesky: size mismatch");
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) {
      if (std::abs(sym[i * n + j] - sym[j * n + i]) > 1e-12) {
        throw UsageError("cholesky: input not symmetric at (" + std::to_string(i) + "," +
                         std::to_string(j) + ")");
      }
    }
  }
  CholeskyFactor f;
  f.n = n;
  f.lower.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = sym[static_cast<std::size_t>(i) * n + j];
      for (int k = 0; k < j; ++k) s -= f.lower[i * n + k] * f.lower[j * n + k];
      if (i == j) {
        if (s <= 1e-12) {
          throw NumericalError("cholesky: matrix not positive definite, pivot " +
                               std::to_string(i) + " = " + std::to_string(s));
        }
        f.lower[static_cast<std::size_t>(i) * n + i] = std::sqrt(s);
      } else {
        f.lower[static_cast<std::size_t>(i) * n + j] =
            s / f.lower[static_cast<std::size_t>(j) * n + j];
      }
    }
  }
  return f;
}

std::vector<std::vector<double>> sample_mvn(std::span<const double> mean,
                                            const CholeskyFactor& factor, RngStream& rng,
                                            int k) {
  const int n = factor.n;
  if (static_cast<int>(mean.size()) != n) throw UsageError("sample_mvn: dimension mismatch");
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(k));
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int s = 0; s < k; ++s) {
    for (int i = 0; i < n; ++i) v[i] = rng.normal();
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      double acc = mean[i];
      for (int j = 0; j <= i; ++j) acc += factor(i, j) * v[j];
      x[i] = acc;
    }
    out.push_back(std::move(x));
  }
  return out;
}

namespace {

// Adaptive Simpson quadrature on a finite interval.
template <class F>
double adaptive_simpson(const F& f, double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
double integrate(const F& f, double a, double b, double tol) {
  if (!(a < b)) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 24);
}

// Integration range for a standard normal variable constrained to a half
// line; 8.5 sigma of truncation error is far below the oracle tolerance.
constexpr double kRange = 8.5;

}  // namespace

double orthant_probability(std::span<const double> mean, const Matd& cov,
                           std::span<const int> signs) {
  const int n = cov.rows;
  if (n < 1 || n > 3) throw UsageError("orthant_probability: only dimensions 1..3 supported");
  if (cov.cols != n || static_cast<int>(mean.size()) != n ||
      static_cast<int>(signs.size()) != n) {
    throw UsageError("orthant_probability: shape mismatch");
  }

  // Work in whitened coordinates r = mean + L u with u ~ N(0, I); the sign
  // constraints become, sequentially in j, half-line constraints on u_j given
  // u_1..u_{j-1}. The innermost constraint integrates in closed form.
  const CholeskyFactor L = cholesky(std::span<const double>(cov.data), n);

  // Bound on u_j: sign_j * (mean_j + sum_{k<j} L_jk u_k + L_jj u_j) >= 0.
  auto bound = [&](int j, const double* u) {
    double shift = mean[j];
    for (int k = 0; k < j; ++k) shift += L(j, k) * u[k];
    return -shift / L(j, j);  // u_j >= bound if sign +, u_j <= bound if sign -
  };

  auto tail_prob = [&](int j, const double* u) {
    const double b = bound(j, u);
    return signs[j] > 0 ? std_normal_cdf(-b) : std_normal_cdf(b);
  };

  if (n == 1) {
    return tail_prob(0, nullptr);
  }

  const double tol = 2e-6;
  if (n == 2) {
    auto f = [&](double u0) {
      const double u[1] = {u0};
      return std_normal_pdf(u0) * tail_prob(1, u);
    };
    const double b0 = bound(0, nullptr);
    const double lo = signs[0] > 0 ? std::max(b0, -kRange) : -kRange;
    const double hi = signs[0] > 0 ? kRange : std::min(b0, kRange);
    return integrate(f, lo, hi, tol);
  }

  auto inner = [&](double u0, double u1) {
    const double u[2] = {u0, u1};
    return std_normal_pdf(u1) * tail_prob(2, u);
  };
  auto f = [&](double u0) {
    const double u[1] = {u0};
    const double b1 = bound(1, u);
    const double lo = signs[1] > 0 ? std::max(b1, -kRange) : -kRange;
    const double hi = signs[1] > 0 ? kRange : std::min(b1, kRange);
    auto g = [&](double u1) { return inner(u0, u1); };
    return std_normal_pdf(u0) * integrate(g, lo, hi, tol);
  };
  const double b0 = bound(0, nullptr);
  const double lo = signs[0] > 0 ? std::max(b0, -kRange) : -kRange;
  const double hi = signs[0] > 0 ? kRange : std::min(b0, kRange);
  return integrate(f, lo, hi, tol);
}

}  // namespace dhn::prob
