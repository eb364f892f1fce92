#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace pcrlab {

template <typename Scalar>
struct SymmetricEigen {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Vector values;   // descending
  Matrix vectors;  // column j pairs with values(j)
  int sweeps = 0;
  bool converged = false;
};

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// A rotation is applied to (p, q) whenever |a_pq| > eps * sqrt(|a_pp a_qq|),
/// so off-diagonal entries are driven to zero relative to the local diagonal
/// scale. For positive definite A = D B D with D diagonal this gives
/// eigenvalues and eigenvector components with small relative error even
/// when the eigenvalues span many orders of magnitude.
///
/// Output is sorted by descending eigenvalue (stable with respect to the
/// solver's diagonal order) and each eigenvector is signed so that its
/// largest-magnitude coordinate is positive.
template <typename Scalar>
SymmetricEigen<Scalar> jacobi_eigen(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& input,
    int max_sweeps = 60) {
  using std::abs;
  using std::sqrt;
  using Matrix = typename SymmetricEigen<Scalar>::Matrix;
  const Eigen::Index n = input.rows();
  Matrix a = input;
  Matrix v = Matrix::Identity(n, n);
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();

  SymmetricEigen<Scalar> out;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        const Scalar app = a(p, p);
        const Scalar aqq = a(q, q);
        if (abs(apq) <= eps * sqrt(abs(app * aqq))) continue;
        rotated = true;

        const Scalar theta = (aqq - app) / (Scalar(2) * apq);
        Scalar t;
        if (abs(theta) > Scalar(1e150)) {
          t = Scalar(0.5) / theta;
        } else {
          t = Scalar(1) / (abs(theta) + sqrt(Scalar(1) + theta * theta));
          if (theta < Scalar(0)) t = -t;
        }
        const Scalar c = Scalar(1) / sqrt(Scalar(1) + t * t);
        const Scalar s = t * c;

        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = a(q, p) = Scalar(0);
        for (Eigen::Index k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const Scalar akp = a(k, p);
          const Scalar akq = a(k, q);
          const Scalar nkp = c * akp - s * akq;
          const Scalar nkq = s * akp + c * akq;
          a(k, p) = a(p, k) = nkp;
          a(k, q) = a(q, k) = nkq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar vkp = v(k, p);
          const Scalar vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    out.sweeps = sweep + 1;
    if (!rotated) {
      out.converged = true;
      break;
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index src = order[static_cast<std::size_t>(j)];
    out.values(j) = a(src, src);
    auto col = v.col(src);
    Eigen::Index arg = 0;
    Scalar best = Scalar(-1);
    for (Eigen::Index k = 0; k < n; ++k) {
      if (abs(col(k)) > best) {
        best = abs(col(k));
        arg = k;
      }
    }
    out.vectors.col(j) = col(arg) < Scalar(0) ? Matrix(-col) : Matrix(col);
  }
  return out;
}

/// Largest singular value of a (possibly empty) dense matrix.
double spectral_norm(const Eigen::MatrixXd& m);

/// Largest absolute eigenvalue of a symmetric matrix.
double symmetric_spectral_norm(const Eigen::MatrixXd& m);

/// Sum of `values` using pairwise (cascade) summation.
double pairwise_sum(const double* values, std::size_t count);

}  // namespace pcrlab
