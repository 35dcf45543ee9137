#ifndef DHN_PROBABILITY_HPP
#define DHN_PROBABILITY_HPP

#include <cmath>
#include <span>
#include <vector>

#include "dhn/errors.hpp"
#include "dhn/matrix.hpp"
#include "dhn/rng.hpp"

namespace dhn::prob {

inline constexpr double kHalfLogTwoPi = 0.918938533204672741780329736406;  // log(sqrt(2*pi))

double std_normal_pdf(double x);

/// Standard normal CDF, accurate over the full double range (erfc based).
double std_normal_cdf(double x);

/// log(Phi(x)) on |x| <= 40 without ever underflowing to -inf. Uses the
/// complementary function down to -20 and the asymptotic tail series below.
/// Throws NumericalError outside the domain; training reaching |x| > 40 is a
/// divergence signal, not a value to be clamped.
double std_normal_log_cdf(double x);

/// Derivative of log(Phi(x)), i.e. phi(x)/Phi(x), computed in the log domain.
double std_normal_log_cdf_grad(double x);

/// log((1/k) * sum exp(v_i)) via max shift. Exact for constant inputs.
double log_sum_exp_mean(std::span<const double> values);

struct CholeskyFactor {
  int n = 0;
  std::vector<double> lower;  // row-major n*n, upper part zero

  double operator()(int i, int j) const { return lower[static_cast<std::size_t>(i) * n + j]; }
};

/// Cholesky factorization of a symmetric positive definite matrix (row-major
/// n*n). Throws NumericalError naming the failing pivot when a pivot drops
/// to 1e-12 or below.
CholeskyFactor cholesky(std::span<const double> sym, int n);

/// k draws of mean + L*v with v ~ N(0, I). Deterministic per stream.
std::vector<std::vector<double>> sample_mvn(std::span<const double> mean,
                                            const CholeskyFactor& factor, RngStream& rng,
                                            int k);

/// Brute-force orthant probability Pr(sign_j * r_j >= 0 for all j) with
/// r ~ N(mean, cov), dimensions 1..3, via nested adaptive quadrature.
/// Absolute error <= 1e-4. Test oracle only; not used by the model path.
double orthant_probability(std::span<const double> mean, const Matd& cov,
                           std::span<const int> signs);

}  // namespace dhn::prob

#endif
