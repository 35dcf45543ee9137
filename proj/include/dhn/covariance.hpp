#ifndef DHN_COVARIANCE_HPP
#define DHN_COVARIANCE_HPP

#include <vector>

#include "dhn/autodiff.hpp"
#include "dhn/matrix.hpp"
#include "dhn/rng.hpp"

namespace dhn {

// Free parameters of a covariance matrix Sigma = I + C*C^T, with C lower
// triangular. Off-diagonal entries of C are stored raw; diagonal entries are
// stored raw and mapped through softplus(.) + 1e-4, so Sigma stays symmetric
// positive definite with diag(Sigma) >= 1 throughout optimization and
// Sigma - I = C*C^T is positive semidefinite by construction.
struct CovarianceParam {
  int dim = 0;
  std::vector<double> raw;  // packed lower triangle, row by row: dim*(dim+1)/2

  static CovarianceParam init(int dim, prob::RngStream& rng);

  // Builds raw parameters reproducing a desired factor matrix C. Requested
  // diagonal entries below the 1e-4 floor are clamped to (just above) it.
  static CovarianceParam from_factor(const Matd& c);

  static int packed_size(int dim) { return dim * (dim + 1) / 2; }
};

inline constexpr double kDiagFloor = 1e-4;

// Mounted view: raw entries as tape leaves (or constants).
struct MountedCov {
  int dim = 0;
  std::vector<ad::Var> raw;
};

MountedCov mount(const CovarianceParam& p, ad::Tape* tape);

/// The factor C with the diagonal mapping applied. Upper entries are zero
/// constants.
Matrix<ad::Var> factor_matrix(const MountedCov& c);

/// Sigma = I + C*C^T.
Matrix<ad::Var> sigma_matrix(const Matrix<ad::Var>& c);

/// Diagonal of Sigma only: 1 + sum_k C_jk^2.
std::vector<ad::Var> sigma_diagonal(const Matrix<ad::Var>& c);

// Double-valued convenience paths (inference, tests, the generator).
Matd factor_matrix(const CovarianceParam& p);
Matd sigma_matrix(const Matd& c);

/// Spec surface: Sigma together with the Cholesky factor of Sigma - I, which
/// is C itself under this parameterization.
std::pair<Matd, Matd> sigma_from_factor(const CovarianceParam& p);

double softplus_value(double x);
double inverse_softplus(double y);

}  // namespace dhn

#endif
