#pragma once

#include "pcrlab/spectrum.hpp"

#include <Eigen/Core>

namespace pcrlab {

/// Eigendecomposition of the sample covariance (1/n) X^T X.
struct PcaDecomposition {
  Eigen::VectorXd lambda_hat;  // descending, >= 0
  Eigen::MatrixXd U_hat;       // orthonormal, column j is u_hat_{j+1}
  int n = 0;

  int p() const { return static_cast<int>(lambda_hat.size()); }
};

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& X);

/// Throws DataError on non-finite input.
PcaDecomposition pca(const Eigen::MatrixXd& X);

/// Whether the fit is replaced by zero when the d-th (empirical) eigenvalue
/// falls below lambda_d / 2.
enum class Thresholding { OracleHalf, None };

struct PcrFit {
  int d = 0;
  Eigen::VectorXd coeffs;
  double lambda_hat_d = 0.0;
  bool thresholded = false;
};

/// Least squares of Y on span(u_hat_1..u_hat_d):
///   coeffs = sum_{j<=d} lambda_hat_j^{-1} (1/n) <X u_hat_j, Y> u_hat_j.
PcrFit pcr_fit(const PcaDecomposition& decomposition, const Eigen::MatrixXd& X,
               const Eigen::VectorXd& Y, int d, const Spectrum& spectrum,
               Thresholding thresholding = Thresholding::OracleHalf);

struct OracleFit {
  int d = 0;
  Eigen::VectorXd coeffs;          // zero beyond coordinate d
  double lambda_hat_prime_d = 0.0; // smallest eigenvalue of the projected covariance
  bool thresholded = false;
};

/// Least squares of Y on the first d population coordinates of X.
OracleFit oracle_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y, int d,
                     const Spectrum& spectrum,
                     Thresholding thresholding = Thresholding::OracleHalf);

}  // namespace pcrlab
