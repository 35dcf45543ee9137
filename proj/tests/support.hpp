#ifndef DHN_TESTS_SUPPORT_HPP
#define DHN_TESTS_SUPPORT_HPP

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "dhn/matrix.hpp"

namespace dhn::testing {

/// Central finite difference d f / d x.
inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Mixed relative/absolute tolerance check for gradient comparisons: the
/// relative bound applies at scale, the absolute floor absorbs FD roundoff
/// on near-zero derivatives.
inline bool grad_close(double a, double b, double rel, double abs_floor) {
  const double diff = std::abs(a - b);
  return diff <= rel * std::max(std::abs(a), std::abs(b)) || diff <= abs_floor;
}

/// Adaptive Simpson integration on [a, b] (test-side quadrature oracle,
/// independent of the library's integrator).
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-10, int depth = 30) {
  std::function<double(double, double, double, double, double, double, double, int)> rec =
      [&](double lo, double hi, double flo, double fmid, double fhi, double whole, double eps,
          int d) -> double {
    const double mid = 0.5 * (lo + hi);
    const double lmid = 0.5 * (lo + mid);
    const double rmid = 0.5 * (mid + hi);
    const double flm = f(lmid);
    const double frm = f(rmid);
    const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
    const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
    const double delta = left + right - whole;
    if (d <= 0 || std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
    return rec(lo, mid, flo, flm, fmid, left, 0.5 * eps, d - 1) +
           rec(mid, hi, fmid, frm, fhi, right, 0.5 * eps, d - 1);
  };
  const double mid = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(mid);
  const double fb = f(b);
  return rec(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, depth);
}

/// Gauss-Jordan inverse with partial pivoting; brute-force oracle only.
inline Matd dense_inverse(Matd a) {
  const int n = a.rows;
  Matd inv = Matd::identity(n);
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    }
    for (int j = 0; j < n; ++j) {
      std::swap(a(col, j), a(pivot, j));
      std::swap(inv(col, j), inv(pivot, j));
    }
    const double d = a(col, col);
    for (int j = 0; j < n; ++j) {
      a(col, j) /= d;
      inv(col, j) /= d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double factor = a(r, col);
      for (int j = 0; j < n; ++j) {
        a(r, j) -= factor * a(col, j);
        inv(r, j) -= factor * inv(col, j);
      }
    }
  }
  return inv;
}

/// Determinant via Gaussian elimination (oracle only).
inline double dense_determinant(Matd a) {
  const int n = a.rows;
  double det = 1.0;
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    }
    if (pivot != col) {
      for (int j = 0; j < n; ++j) std::swap(a(col, j), a(pivot, j));
      det = -det;
    }
    det *= a(col, col);
    if (a(col, col) == 0.0) return 0.0;
    for (int r = col + 1; r < n; ++r) {
      const double factor = a(r, col) / a(col, col);
      for (int j = col; j < n; ++j) a(r, j) -= factor * a(col, j);
    }
  }
  return det;
}

}  // namespace dhn::testing

#endif
