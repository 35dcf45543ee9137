#ifndef DHN_ABUNDANCE_HEAD_HPP
#define DHN_ABUNDANCE_HEAD_HPP

#include <span>
#include <vector>

#include "dhn/autodiff.hpp"
#include "dhn/covariance.hpp"
#include "dhn/matrix.hpp"
#include "dhn/rng.hpp"

namespace dhn {

// Strictly positive entries of one label row: sorted target indices and the
// corresponding values (positive reals, or positive integers for count data).
struct PositiveSubset {
  std::vector<int> indices;
  std::vector<double> values;

  int size() const { return static_cast<int>(indices.size()); }
  bool empty() const { return indices.empty(); }

  static PositiveSubset from_labels(std::span<const double> labels);
};

/// log Gamma(n + 1).
double log_factorial(long long n);

/// Log density of the positive sub-vector under the latent-Gaussian model:
/// log phi(log(y+) | mu'+, Sigma'+), where mu'+ and Sigma'+ = (I + C'C'^T)+
/// are the sub-parts selected by the subset. Evaluated via Cholesky of the
/// P x P principal submatrix (triangular solve, never an explicit inverse);
/// differentiable w.r.t. mu' and C'. The log-Jacobian of the y -> log y
/// change of variables is constant in the parameters and omitted: this is
/// the density of log(y+), not of y+.
ad::Var mlnd_log_density(std::span<const ad::Var> mu_full, const Matrix<ad::Var>& factor_c,
                         const PositiveSubset& subset);

/// K-sample Monte Carlo estimate of the log likelihood of positive counts
/// under a Poisson observation model whose log rate is jointly Gaussian:
/// log lambda = mu' + z + C'v ~ N(mu', I + C'C'^T) with z, v ~ N(0, I).
/// Each joint sample is restricted to the subset coordinates (the marginal
/// law of a restriction is exact); the per-sample log term is
/// sum_j [y_j log lambda_j - lambda_j - log(y_j!)] and the estimate is
/// log_sum_exp_mean over samples. The Poisson is untruncated.
///
/// `indices`/`values` need not be strictly positive: a zero count contributes
/// the well-defined term -lambda_j. The hurdle path passes a PositiveSubset;
/// the head-only ablation passes all targets.
ad::Var poisson_lognormal_log_likelihood(std::span<const ad::Var> mu_full,
                                         const Matrix<ad::Var>& factor_c,
                                         std::span<const int> indices,
                                         std::span<const double> values, int k_samples,
                                         prob::RngStream& rng);

/// Noise-seam overload: z_noise and v_noise are k_samples x L standard
/// normal draws.
ad::Var poisson_lognormal_log_likelihood_given_noise(std::span<const ad::Var> mu_full,
                                                     const Matrix<ad::Var>& factor_c,
                                                     std::span<const int> indices,
                                                     std::span<const double> values,
                                                     const Matd& z_noise, const Matd& v_noise);

}  // namespace dhn

#endif
