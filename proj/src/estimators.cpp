#include "pcrlab/estimators.hpp"

#include "pcrlab/errors.hpp"
#include "pcrlab/linalg.hpp"

#include <string>

namespace pcrlab {

namespace {

void check_fit_args(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y, int d,
                    const Spectrum& spectrum) {
  if (X.rows() != Y.size())
    throw DataError("design has " + std::to_string(X.rows()) + " rows but " +
                    std::to_string(Y.size()) + " responses");
  if (X.cols() != spectrum.p())
    throw DataError("design dimension does not match the spectrum");
  if (d < 1 || d > spectrum.p())
    throw ParameterError("cut dimension d=" + std::to_string(d) +
                         " outside [1, p]");
}

}  // namespace

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& X) {
  const double n = static_cast<double>(X.rows());
  Eigen::MatrixXd cov(X.cols(), X.cols());
  cov.setZero();
  cov.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose(), 1.0 / n);
  return cov.selfadjointView<Eigen::Lower>();
}

PcaDecomposition pca(const Eigen::MatrixXd& X) {
  if (X.rows() < 1 || X.cols() < 1) throw DataError("pca needs a non-empty design");
  if (!X.allFinite()) throw DataError("design contains non-finite entries");
  const auto eig = jacobi_eigen<double>(sample_covariance(X));
  if (!eig.converged) throw DegenerateFitError("Jacobi eigensolver did not converge");
  PcaDecomposition out;
  out.lambda_hat = eig.values.cwiseMax(0.0);
  out.U_hat = eig.vectors;
  out.n = static_cast<int>(X.rows());
  return out;
}

PcrFit pcr_fit(const PcaDecomposition& decomposition, const Eigen::MatrixXd& X,
               const Eigen::VectorXd& Y, int d, const Spectrum& spectrum,
               Thresholding thresholding) {
  check_fit_args(X, Y, d, spectrum);
  if (decomposition.p() != spectrum.p())
    throw DataError("decomposition dimension does not match the spectrum");

  PcrFit fit;
  fit.d = d;
  fit.lambda_hat_d = decomposition.lambda_hat(d - 1);
  fit.coeffs = Eigen::VectorXd::Zero(spectrum.p());
  if (thresholding == Thresholding::OracleHalf &&
      fit.lambda_hat_d < spectrum.lambda(d) / 2.0) {
    fit.thresholded = true;
    return fit;
  }
  if (!(fit.lambda_hat_d > 0.0))
    throw DegenerateFitError("lambda_hat_d = 0: PCR in dimension " +
                             std::to_string(d) + " is undefined");

  const double n = static_cast<double>(X.rows());
  const auto U = decomposition.U_hat.leftCols(d);
  // Scores <X u_hat_j, Y> / n for j <= d.
  const Eigen::VectorXd scores = (X * U).transpose() * Y / n;
  const Eigen::VectorXd weights =
      scores.cwiseQuotient(decomposition.lambda_hat.head(d));
  fit.coeffs = U * weights;
  return fit;
}

OracleFit oracle_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y, int d,
                     const Spectrum& spectrum, Thresholding thresholding) {
  check_fit_args(X, Y, d, spectrum);
  const double n = static_cast<double>(X.rows());
  const Eigen::MatrixXd Xd = X.leftCols(d);
  const auto eig = jacobi_eigen<double>(sample_covariance(Xd));

  OracleFit fit;
  fit.d = d;
  fit.lambda_hat_prime_d = std::max(eig.values(d - 1), 0.0);
  fit.coeffs = Eigen::VectorXd::Zero(spectrum.p());
  if (thresholding == Thresholding::OracleHalf &&
      fit.lambda_hat_prime_d < spectrum.lambda(d) / 2.0) {
    fit.thresholded = true;
    return fit;
  }
  if (!(fit.lambda_hat_prime_d > 0.0))
    throw DegenerateFitError("projected design is singular in dimension " +
                             std::to_string(d));

  const Eigen::VectorXd rhs = Xd.transpose() * Y / n;
  const Eigen::VectorXd rotated = eig.vectors.transpose() * rhs;
  fit.coeffs.head(d) = eig.vectors * rotated.cwiseQuotient(eig.values);
  return fit;
}

}  // namespace pcrlab
