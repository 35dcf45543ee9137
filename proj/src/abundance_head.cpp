#include "dhn/abundance_head.hpp"

#include <cmath>
#include <string>

#include "dhn/errors.hpp"
#include "dhn/probability.hpp"

namespace dhn {

PositiveSubset PositiveSubset::from_labels(std::span<const double> labels) {
  PositiveSubset s;
  for (int j = 0; j < static_cast<int>(labels.size()); ++j) {
    if (labels[j] > 0.0) {
      s.indices.push_back(j);
      s.values.push_back(labels[j]);
    }
  }
  return s;
}

double log_factorial(long long n) {
  if (n < 0) throw UsageError("log_factorial: negative argument");
  return std::lgamma(static_cast<double>(n) + 1.0);
}

namespace {

// Principal submatrix of Sigma = I + C*C^T at the given indices, built
// directly from the rows of C.
Matrix<ad::Var> sigma_submatrix(const Matrix<ad::Var>& c, std::span<const int> idx) {
  const int p = static_cast<int>(idx.size());
  Matrix<ad::Var> s(p, p, ad::constant(0.0));
  for (int a = 0; a < p; ++a) {
    for (int b = 0; b <= a; ++b) {
      const int i = idx[a];
      const int j = idx[b];
      ad::Var acc = ad::constant(i == j ? 1.0 : 0.0);
      for (int k = 0; k <= std::min(i, j); ++k) acc = acc + c(i, k) * c(j, k);
      s(a, b) = acc;
      s(b, a) = acc;
    }
  }
  return s;
}

// Cholesky on tape values; by construction of Sigma the pivots cannot fail,
// so a failure here is an internal error rather than a data condition.
Matrix<ad::Var> cholesky_var(const Matrix<ad::Var>& s) {
  const int n = s.rows;
  Matrix<ad::Var> l(n, n, ad::constant(0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      ad::Var acc = s(i, j);
      for (int k = 0; k < j; ++k) acc = acc - l(i, k) * l(j, k);
      if (i == j) {
        if (!(acc.value > 0.0)) {
          throw NumericalError("internal: submatrix of I + C*C^T lost positive definiteness");
        }
        l(i, i) = ad::sqrt(acc);
      } else {
        l(i, j) = acc / l(j, j);
      }
    }
  }
  return l;
}

}  // namespace

ad::Var mlnd_log_density(std::span<const ad::Var> mu_full, const Matrix<ad::Var>& factor_c,
                         const PositiveSubset& subset) {
  const int l = factor_c.rows;
  if (static_cast<int>(mu_full.size()) != l) throw UsageError("mlnd_log_density: mu size mismatch");
  const int p = subset.size();
  if (p < 1) throw UsageError("mlnd_log_density: empty positive subset");
  for (int a = 0; a < p; ++a) {
    if (subset.indices[a] < 0 || subset.indices[a] >= l) {
      throw UsageError("mlnd_log_density: subset index out of range");
    }
    if (!(subset.values[a] > 0.0)) {
      throw DataError("mlnd_log_density: non-positive value at target index " +
                      std::to_string(subset.indices[a]));
    }
  }

  const Matrix<ad::Var> sig = sigma_submatrix(factor_c, subset.indices);
  const Matrix<ad::Var> chol = cholesky_var(sig);

  // Solve L t = log(y+) - mu'+ by forward substitution; then
  // log density = -1/2 (P log 2pi + log det Sigma'+ + |t|^2).
  std::vector<ad::Var> t(static_cast<std::size_t>(p));
  for (int a = 0; a < p; ++a) {
    ad::Var acc = ad::constant(std::log(subset.values[a])) - mu_full[subset.indices[a]];
    for (int k = 0; k < a; ++k) acc = acc - chol(a, k) * t[k];
    t[a] = acc / chol(a, a);
  }
  ad::Var log_det = ad::constant(0.0);
  for (int a = 0; a < p; ++a) log_det = log_det + ad::log(chol(a, a));
  ad::Var quad = ad::constant(0.0);
  for (int a = 0; a < p; ++a) quad = quad + ad::square(t[a]);
  return ad::constant(-0.5 * p * std::log(2.0 * 3.14159265358979323846)) - log_det -
         0.5 * quad;
}

ad::Var poisson_lognormal_log_likelihood_given_noise(std::span<const ad::Var> mu_full,
                                                     const Matrix<ad::Var>& factor_c,
                                                     std::span<const int> indices,
                                                     std::span<const double> values,
                                                     const Matd& z_noise, const Matd& v_noise) {
  const int l = factor_c.rows;
  if (static_cast<int>(mu_full.size()) != l) {
    throw UsageError("poisson_lognormal: mu size mismatch");
  }
  if (indices.size() != values.size() || indices.empty()) {
    throw UsageError("poisson_lognormal: bad subset");
  }
  if (z_noise.cols != l || v_noise.cols != l || z_noise.rows != v_noise.rows) {
    throw UsageError("poisson_lognormal: noise shape mismatch");
  }
  const int k = z_noise.rows;

  std::vector<double> log_fact(values.size());
  for (std::size_t a = 0; a < values.size(); ++a) {
    const double y = values[a];
    if (!(y >= 0.0) || y != std::floor(y)) {
      throw DataError("poisson_lognormal: count value " + std::to_string(y) +
                      " at target index " + std::to_string(indices[a]) +
                      " is not a nonnegative integer");
    }
    log_fact[a] = log_factorial(static_cast<long long>(y));
  }

  std::vector<ad::Var> per_sample;
  per_sample.reserve(static_cast<std::size_t>(k));
  std::vector<ad::Var> terms(values.size());
  for (int s = 0; s < k; ++s) {
    for (std::size_t a = 0; a < values.size(); ++a) {
      const int j = indices[a];
      // log lambda_j = mu'_j + z_j + sum_{m<=j} C_jm v_m  ~  N(mu'_j, Sigma'_jj).
      ad::Var log_lambda = mu_full[j] + ad::constant(z_noise(s, j));
      for (int m = 0; m <= j; ++m) {
        log_lambda = log_lambda + factor_c(j, m) * ad::constant(v_noise(s, m));
      }
      if (log_lambda.value > 700.0) {
        throw NumericalError("poisson_lognormal: rate overflow, log lambda = " +
                             std::to_string(log_lambda.value));
      }
      terms[a] = ad::constant(values[a]) * log_lambda - ad::exp(log_lambda) -
                 ad::constant(log_fact[a]);
    }
    per_sample.push_back(ad::sum(terms));
  }
  return ad::log_sum_exp_mean(per_sample);
}

ad::Var poisson_lognormal_log_likelihood(std::span<const ad::Var> mu_full,
                                         const Matrix<ad::Var>& factor_c,
                                         std::span<const int> indices,
                                         std::span<const double> values, int k_samples,
                                         prob::RngStream& rng) {
  const int l = factor_c.rows;
  if (k_samples < 1) throw UsageError("poisson_lognormal: need at least one sample");
  Matd z(k_samples, l);
  Matd v(k_samples, l);
  for (double& x : z.data) x = rng.normal();
  for (double& x : v.data) x = rng.normal();
  return poisson_lognormal_log_likelihood_given_noise(mu_full, factor_c, indices, values, z, v);
}

}  // namespace dhn
