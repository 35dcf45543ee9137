#include "dhn/covariance.hpp"

#include <cmath>

#include "dhn/errors.hpp"

namespace dhn {

double softplus_value(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double inverse_softplus(double y) {
  if (!(y > 0.0)) throw UsageError("inverse_softplus: argument must be positive");
  // log(exp(y) - 1), written to survive both small and large y.
  if (y > 30.0) return y;
  return std::log(std::expm1(y));
}

CovarianceParam CovarianceParam::init(int dim, prob::RngStream& rng) {
  if (dim < 1) throw UsageError("CovarianceParam: dimension must be positive");
  CovarianceParam p;
  p.dim = dim;
  p.raw.resize(static_cast<std::size_t>(packed_size(dim)));
  // Near-independent start: diagonal softplus^-1(0.05), small random
  // off-diagonals.
  const double diag_raw = inverse_softplus(0.05);
  int k = 0;
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j <= i; ++j, ++k) {
      p.raw[k] = (i == j) ? diag_raw : 0.01 * rng.normal();
    }
  }
  return p;
}

CovarianceParam CovarianceParam::from_factor(const Matd& c) {
  if (c.rows != c.cols || c.rows < 1) throw UsageError("from_factor: square matrix required");
  CovarianceParam p;
  p.dim = c.rows;
  p.raw.resize(static_cast<std::size_t>(packed_size(c.rows)));
  int k = 0;
  for (int i = 0; i < c.rows; ++i) {
    for (int j = 0; j <= i; ++j, ++k) {
      if (i == j) {
        const double target = std::max(c(i, i) - kDiagFloor, 1e-12);
        p.raw[k] = inverse_softplus(target);
      } else {
        p.raw[k] = c(i, j);
      }
    }
  }
  return p;
}

MountedCov mount(const CovarianceParam& p, ad::Tape* tape) {
  MountedCov m;
  m.dim = p.dim;
  if (tape) {
    m.raw = tape->leaves(p.raw);
  } else {
    m.raw.reserve(p.raw.size());
    for (double v : p.raw) m.raw.push_back(ad::constant(v));
  }
  return m;
}

Matrix<ad::Var> factor_matrix(const MountedCov& c) {
  Matrix<ad::Var> f(c.dim, c.dim, ad::constant(0.0));
  int k = 0;
  for (int i = 0; i < c.dim; ++i) {
    for (int j = 0; j <= i; ++j, ++k) {
      f(i, j) = (i == j) ? ad::softplus(c.raw[k]) + kDiagFloor : c.raw[k];
    }
  }
  return f;
}

Matrix<ad::Var> sigma_matrix(const Matrix<ad::Var>& c) {
  const int n = c.rows;
  Matrix<ad::Var> s(n, n, ad::constant(0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      // C is lower triangular: row dot products stop at min(i, j).
      ad::Var acc = ad::constant(i == j ? 1.0 : 0.0);
      for (int k = 0; k <= j; ++k) acc = acc + c(i, k) * c(j, k);
      s(i, j) = acc;
      s(j, i) = acc;
    }
  }
  return s;
}

std::vector<ad::Var> sigma_diagonal(const Matrix<ad::Var>& c) {
  std::vector<ad::Var> d;
  d.reserve(static_cast<std::size_t>(c.rows));
  for (int i = 0; i < c.rows; ++i) {
    ad::Var acc = ad::constant(1.0);
    for (int k = 0; k <= i; ++k) acc = acc + ad::square(c(i, k));
    d.push_back(acc);
  }
  return d;
}

Matd factor_matrix(const CovarianceParam& p) {
  Matd f(p.dim, p.dim, 0.0);
  int k = 0;
  for (int i = 0; i < p.dim; ++i) {
    for (int j = 0; j <= i; ++j, ++k) {
      f(i, j) = (i == j) ? softplus_value(p.raw[k]) + kDiagFloor : p.raw[k];
    }
  }
  return f;
}

Matd sigma_matrix(const Matd& c) {
  const int n = c.rows;
  Matd s(n, n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double acc = (i == j) ? 1.0 : 0.0;
      for (int k = 0; k <= std::min(i, j); ++k) acc += c(i, k) * c(j, k);
      s(i, j) = acc;
      s(j, i) = acc;
    }
  }
  return s;
}

std::pair<Matd, Matd> sigma_from_factor(const CovarianceParam& p) {
  Matd c = factor_matrix(p);
  return {sigma_matrix(c), c};
}

}  // namespace dhn
