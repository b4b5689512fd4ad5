#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "efl/error.hpp"
#include "efl/matrix.hpp"

namespace efl {

struct EigenResult {
  std::vector<double> eigenvalues;  // descending
  Matrix eigenvectors;              // column j pairs with eigenvalues[j]
};

namespace detail {

inline double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace detail

// Cyclic Jacobi eigendecomposition of a real symmetric matrix.
//
// Sweeps over all (p, q) pairs in row order, annihilating a(p, q) with a
// plane rotation, until the off-diagonal Frobenius norm drops to
// tol * max(1, |S|_F). Eigenvalues come back sorted descending (ties keep
// the lower original index first).
inline EigenResult jacobi_eigh(const Matrix& s, double tol = 1e-10, std::size_t max_sweeps = 100) {
  detail::require(s.rows() == s.cols(), "jacobi_eigh: matrix is ", s.rows(), "x", s.cols(),
                  ", expected square");
  detail::require(s.rows() > 0, "jacobi_eigh: empty matrix");
  detail::require(s.all_finite(), "jacobi_eigh: non-finite entry");
  const std::size_t n = s.rows();

  double max_abs = 0.0;
  for (double v : s.data()) max_abs = std::max(max_abs, std::abs(v));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      detail::require(std::abs(s(i, j) - s(j, i)) <= 1e-10 * std::max(1.0, max_abs),
                      "jacobi_eigh: asymmetric at (", i, ",", j, "): ", s(i, j), " vs ", s(j, i));

  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (s(i, j) + s(j, i));
  Matrix v = Matrix::identity(n);

  const double threshold = tol * std::max(1.0, frobenius_norm(a));
  double off = detail::off_diagonal_norm(a);
  std::size_t sweep = 0;
  while (off > threshold) {
    if (sweep == max_sweeps) {
      throw ConvergenceError(detail::concat("jacobi_eigh: no convergence after ", max_sweeps,
                                            " sweeps, off-diagonal norm ", off),
                             off);
    }
    ++sweep;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
    off = detail::off_diagonal_norm(a);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  EigenResult out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    out.eigenvalues[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, j) = v(i, order[j]);
  }
  return out;
}

}  // namespace efl
