#ifndef DHN_PROBIT_HEAD_HPP
#define DHN_PROBIT_HEAD_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "dhn/autodiff.hpp"
#include "dhn/covariance.hpp"
#include "dhn/matrix.hpp"
#include "dhn/rng.hpp"

namespace dhn {

/// y'_j = 1 iff y_j > 0.
std::vector<std::uint8_t> binary_pattern(std::span<const double> labels);

/// K-sample Monte Carlo estimate of the log joint likelihood of the binary
/// pattern under the latent-Gaussian threshold model with mean mu and
/// covariance Sigma = I + C*C^T.
///
/// Each sample draws w = mu + C*v with v ~ N(0, I) (so w ~ N(mu, Sigma - I));
/// the per-sample log term is sum_j [y'_j log Phi(w_j) + (1-y'_j) log Phi(-w_j)]
/// and the estimate is log_sum_exp_mean over samples. The sign flip on w_j
/// replaces the diag(2y'-1) matrix product, which is never materialized.
/// Differentiable w.r.t. mu and C through the reparameterized samples.
ad::Var mvp_log_likelihood(std::span<const ad::Var> mu, const Matrix<ad::Var>& factor_c,
                           std::span<const std::uint8_t> y_prime, int k_samples,
                           prob::RngStream& rng);

/// Same estimator with the standard-normal draws supplied explicitly
/// (noise is k_samples x L). Deterministic seam used by gradient checks and
/// symmetry tests; the rng overload draws noise and delegates here.
ad::Var mvp_log_likelihood_given_noise(std::span<const ad::Var> mu,
                                       const Matrix<ad::Var>& factor_c,
                                       std::span<const std::uint8_t> y_prime,
                                       const Matd& noise);

/// Marginal positive probabilities p_j = Phi(mu_j / sqrt(Sigma_jj)).
std::vector<double> positive_probabilities(std::span<const double> mu, const Matd& sigma);

}  // namespace dhn

#endif
