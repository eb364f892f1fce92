#pragma once

#include "pcrlab/datagen.hpp"
#include "pcrlab/estimators.hpp"
#include "pcrlab/spectrum.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace pcrlab {

// ---------------------------------------------------------------------------
// Comparison conventions
// ---------------------------------------------------------------------------

/// Absolute floor used when normalizing residuals.
inline constexpr double kResidualFloor = 1e-14;

/// |lhs - rhs| / max(scale, kResidualFloor), where `scale` is the largest
/// absolute value among all terms entering either side of the identity.
double identity_residual(double lhs, double rhs, std::initializer_list<double> terms);

struct IdentityCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
};

/// One deterministic inequality lhs <= rhs. `evaluated` is false when the
/// inequality is conditional on an event that did not occur (or the quantity
/// is undefined); such checks never count as violations.
struct InequalityCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool evaluated = true;
  bool holds = true;
};

/// lhs <= rhs + rel_tol * max(|lhs|, |rhs|, kResidualFloor).
InequalityCheck make_check(std::string name, double lhs, double rhs,
                           bool evaluated, double rel_tol);

// ---------------------------------------------------------------------------
// Risk functionals
// ---------------------------------------------------------------------------

/// <g - f, Sigma (g - f)> = sum_j lambda_j (g_j - f_j)^2.
double prediction_error(const Eigen::VectorXd& coeffs, const GroundTruth& gt);

/// ||g - f||^2.
double h_norm_error(const Eigen::VectorXd& coeffs, const GroundTruth& gt);

struct BiasVariance {
  double bias = 0.0;      // <P_hat_{>d} f, Sigma P_hat_{>d} f>
  double variance = 0.0;  // (sigma^2 / n) sum_{j<=d} tr(P_hat_j Sigma) / lambda_hat_j
};

/// Conditional (on the design) bias-variance split of the PCR prediction
/// error. Throws DegenerateFitError if lambda_hat_d = 0.
BiasVariance bias_variance(const PcaDecomposition& decomposition,
                           const GroundTruth& gt, int d, int n);

/// Conditional mean squared prediction error from the explicit linear maps
/// f_hat - f = (A - I) f + B eps with A = M X^T X / n, B = M X^T / n and
/// M = sum_{j<=d} lambda_hat_j^{-1} u_hat_j u_hat_j^T:
///   ||(A - I) f||_Sigma^2 + sigma^2 tr(B^T Sigma B).
double conditional_mse_direct(const PcaDecomposition& decomposition,
                              const Eigen::MatrixXd& X, const GroundTruth& gt,
                              int d, int n);

/// Same linear maps with Sigma replaced by the identity (H-norm error).
double conditional_h_error_direct(const PcaDecomposition& decomposition,
                                  const Eigen::MatrixXd& X,
                                  const GroundTruth& gt, int d, int n);

/// || (sum_{k>d} lambda_k^{1/2} P_k + sum_{j<=d} lambda_j^{1/2} P_j P_hat_{>d}
///     - sum_{k>d} lambda_k^{1/2} P_k P_hat_{<=d}) f ||^2.
double bias_identity_rhs(const PcaDecomposition& decomposition,
                         const GroundTruth& gt, int d);

struct ExcessRisk {
  double excess = 0.0;              // tr(Sigma (P_{<=d} - P_hat_{<=d}))
  double leading_lost = 0.0;        // sum_{j<=d} lambda_j ||P_j P_hat_{>d}||_2^2
  double trailing_gained = 0.0;     // sum_{k>d} lambda_k ||P_k P_hat_{<=d}||_2^2
  double recon_empirical = 0.0;     // R(P_hat_{<=d}) = tr(Sigma P_hat_{>d})
  double recon_population = 0.0;    // R(P_{<=d}) = sum_{k>d} lambda_k
  double via_reconstruction = 0.0;  // recon_empirical - recon_population
};

ExcessRisk excess_risk(const PcaDecomposition& decomposition,
                       const Spectrum& spectrum, int d);

struct ExcessSplit {
  double le = 0.0;  // sum_{j<=d} (lambda_j - mu) ||P_j P_hat_{>d}||_2^2
  double gt = 0.0;  // sum_{k>d} (mu - lambda_k) ||P_k P_hat_{<=d}||_2^2
};

ExcessSplit excess_risk_split(const PcaDecomposition& decomposition,
                              const Spectrum& spectrum, int d, double mu);

// ---------------------------------------------------------------------------
// Deterministic bounds
// ---------------------------------------------------------------------------

/// Bias against its excess-risk bounds for a cut r <= d.
struct BiasBounds {
  double lhs = 0.0;             // bias
  double decomposition = 0.0;   // ||sum_{j<=r}(lambda_j - lambda_{r+1})^{1/2} P_j P_hat_{>d} f||^2
                                //   + lambda_{r+1} ||P_hat_{>d} f||^2
  double operator_form = 0.0;   // lambda_{r+1}||f||^2 + ||sum (..)^{1/2} P_j P_hat_{>r}||_inf^2 ||f||^2
  double excess_form = 0.0;     // lambda_{r+1}||f||^2 + E_{<=r}(lambda_{r+1}) ||f||^2
  std::vector<InequalityCheck> checks(double rel_tol) const;
};

BiasBounds bias_bounds(const PcaDecomposition& decomposition,
                       const GroundTruth& gt, int d, int r);

/// Explicit-constant chain bounding the bias under f = Sigma^s h.
struct SourceBiasChain {
  double shrink_lhs = 0.0, shrink_rhs = 0.0;        // lambda_{r+1}||P_hat_{>d}f||^2 <= lambda_{r+1}||P_hat_{>r}f||^2
  double split_lhs = 0.0, split_rhs = 0.0;          // ||P_hat_{>r}f||^2 <= 2||P_{>r}f||^2 + 2||P_hat_{>r}P_{<=r}f||^2
  double tail_lhs = 0.0, tail_rhs = 0.0;            // ||P_{>r}f||^2 <= lambda_{r+1}^{2s}||h||^2
  double rotation_lhs = 0.0;                        // ||P_hat_{>r}P_{<=r}f||^2
  double rotation_mid = 0.0;                        // 2||sum(lambda_j^s-lambda_{r+1}^s)P_hat_{>r}P_j h||^2 + 2 lambda_{r+1}^{2s}||P_hat_{>r}P_{<=r}h||^2
  double rotation_rhs = 0.0;                        // 2 sum (..)^2 ||P_j P_hat_{>r}||^2 ||h||^2 + 2 lambda_{r+1}^{2s}||h||^2
  double eigen_constant = 0.0;                      // C with lambda_{r+1}(lambda_j^s-lambda_{r+1}^s)^2 <= C(lambda_j-lambda_{r+1})
  double eigen_worst_lhs = 0.0, eigen_worst_rhs = 0.0;
  bool eigen_all_hold = true;
  double total_lhs = 0.0;                           // bias
  double total_rhs = 0.0;                           // (lambda_1^{2s} + 4C) E_{<=r} ||h||^2 + 6 lambda_{r+1}^{1+2s} ||h||^2
  std::vector<InequalityCheck> checks(double rel_tol) const;
};

SourceBiasChain source_bias_chain(const PcaDecomposition& decomposition,
                                  const GroundTruth& gt, int d, int r);

/// Grouped bound on sum_{j<=d} tr(P_hat_j Sigma) / lambda_hat_j.
struct VarianceBound {
  bool event = false;         // lambda_hat_d >= lambda_d / 2
  double lhs = 0.0;
  double leading = 0.0;       // 2 C1 C2 d
  double grouped = 0.0;       // sum_{2<=l<=d'} lambda_{r_l}^{-1} sum_{k<=r_{l-1}} (lambda_k - lambda_{r_{l-1}+1}) ||P_hat_{J_l} P_k||_2^2
  double halving_count = 0.0; // #{j <= d : lambda_hat_j < lambda_j / 2}
  double rhs = 0.0;           // leading + 2 grouped + 2 lambda_1 lambda_d^{-1} halving_count
};

VarianceBound variance_bound(const PcaDecomposition& decomposition,
                             const GroundTruth& gt, const Grouping& grouping,
                             int d, int n);

struct Remainders {
  double r1 = 0.0;  // E_{<=r}(lambda_{r+1}) ||h||^2
  double r2 = 0.0;  // grouped + lambda_d^{-1} halving_count
};

Remainders final_remainders(const PcaDecomposition& decomposition,
                            const GroundTruth& gt, const Grouping& grouping,
                            int d, int r);

/// Conditional H-norm error against its bound on {lambda_hat_d >= lambda_d/2}.
struct HNormBounds {
  bool event = false;
  double lhs = 0.0;            // E(||f_hat - f||^2 | X), direct linear-map route
  double bias_term = 0.0;      // 2 lambda_{r+1}^{2s} ||h||^2
  double variance_term = 0.0;  // (2 sigma^2 / n)(sum_{j<=d} lambda_j^{-1} + R1)
  double r1 = 0.0;             // lambda_d^{-1} #{j <= d : lambda_hat_j < lambda_j / 2}
  double r2 = 0.0;             // 2 ||P_hat_{<=r} - P_{<=r}||_inf^2 ||f||^2
  double rhs = 0.0;
};

HNormBounds h_norm_bounds(const PcaDecomposition& decomposition,
                          const Eigen::MatrixXd& X, const GroundTruth& gt,
                          int d, int r, int n);

/// Gap weights for the block J = {r+1, ..., s}:
///   g_k = lambda_k - lambda_{r+1}                          (k <= r)
///   g_k = min(lambda_r - lambda_k, lambda_k - lambda_{s+1}) (k in J, unused)
///   g_k = lambda_s - lambda_k                              (k > s)
struct GapWeights {
  int r = 0;
  int s = 0;
  bool defined = false;  // strict gaps at r (if r > 0) and at s (if s < p)
  Eigen::VectorXd g;     // 0-based, length p
};

GapWeights gap_weights(const Spectrum& spectrum, int r, int s);

/// Projector-alignment inequality for the block J = {r+1, ..., s}:
///   sum_{k not in J} g_k ||P_hat_J P_k||_2^2 <= 16 sum_{k not in J} ||P_J Delta P_k||_2^2 / g_k
/// on the event that all |lambda_hat_j - lambda_k| >= |lambda_j - lambda_k|/2
/// (j in J, k not in J) and ||S Delta S||_inf <= 1/4, with Delta = Sigma - Sigma_hat.
struct AlignmentCheck {
  bool defined = false;
  bool eigen_event = false;
  double sds_norm = 0.0;
  bool event = false;
  double lhs = 0.0;
  double rhs = 0.0;
};

AlignmentCheck projector_alignment(const PcaDecomposition& decomposition,
                                   const Eigen::MatrixXd& X,
                                   const Spectrum& spectrum, int r, int s,
                                   int n);

/// Expected bias of PCR for an isotropic Gaussian design: (p - d) / p ||f||^2.
double isotropic_bias_expectation(int p, int d, double f_norm2);

enum class BoundRegime {
  General,      // general excess-risk bound with tr_{>r} and exponential remainder
  Exponential,  // C d e^{-alpha d} / n
  Polynomial,   // C d^{2-alpha} log(e d) / n
};

/// User-supplied constants for bounds whose constants are not explicit.
struct BoundConstants {
  double c = 1.0;
  double C = 1.0;
};

/// Reference curve for the expected excess risk E_{<=d}(lambda_{d+1}).
/// Reported next to empirical means, never asserted.
double excess_risk_bound_rhs(const Spectrum& spectrum, int d, int n,
                             BoundRegime regime, BoundConstants constants);

}  // namespace pcrlab
