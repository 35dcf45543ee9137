#include "dhn/probit_head.hpp"

#include <cmath>
#include <string>

#include "dhn/errors.hpp"
#include "dhn/probability.hpp"

namespace dhn {

std::vector<std::uint8_t> binary_pattern(std::span<const double> labels) {
  std::vector<std::uint8_t> y;
  y.reserve(labels.size());
  for (double v : labels) y.push_back(v > 0.0 ? 1 : 0);
  return y;
}

ad::Var mvp_log_likelihood_given_noise(std::span<const ad::Var> mu,
                                       const Matrix<ad::Var>& factor_c,
                                       std::span<const std::uint8_t> y_prime,
                                       const Matd& noise) {
  const int l = factor_c.rows;
  if (static_cast<int>(mu.size()) != l || static_cast<int>(y_prime.size()) != l ||
      noise.cols != l) {
    throw UsageError("mvp_log_likelihood: dimension mismatch");
  }
  const int k = noise.rows;
  if (k < 1) throw UsageError("mvp_log_likelihood: need at least one sample");

  std::vector<ad::Var> per_sample;
  per_sample.reserve(static_cast<std::size_t>(k));
  std::vector<ad::Var> terms(static_cast<std::size_t>(l));
  for (int s = 0; s < k; ++s) {
    for (int j = 0; j < l; ++j) {
      // w_j = mu_j + sum_{m<=j} C_jm v_m, drawn from N(mu, C C^T).
      ad::Var w = mu[j];
      for (int m = 0; m <= j; ++m) w = w + factor_c(j, m) * ad::constant(noise(s, m));
      terms[j] = ad::norm_log_cdf(y_prime[j] ? w : -w);
    }
    per_sample.push_back(ad::sum(terms));
  }
  return ad::log_sum_exp_mean(per_sample);
}

ad::Var mvp_log_likelihood(std::span<const ad::Var> mu, const Matrix<ad::Var>& factor_c,
                           std::span<const std::uint8_t> y_prime, int k_samples,
                           prob::RngStream& rng) {
  const int l = factor_c.rows;
  Matd noise(k_samples, l);
  for (double& v : noise.data) v = rng.normal();
  return mvp_log_likelihood_given_noise(mu, factor_c, y_prime, noise);
}

std::vector<double> positive_probabilities(std::span<const double> mu, const Matd& sigma) {
  if (static_cast<int>(mu.size()) != sigma.rows) {
    throw UsageError("positive_probabilities: dimension mismatch");
  }
  std::vector<double> p;
  p.reserve(mu.size());
  for (int j = 0; j < sigma.rows; ++j) {
    p.push_back(prob::std_normal_cdf(mu[j] / std::sqrt(sigma(j, j))));
  }
  return p;
}

}  // namespace dhn
