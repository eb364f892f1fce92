#include "pcrlab/risk.hpp"

#include "pcrlab/errors.hpp"
#include "pcrlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pcrlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_cut(int d, int p, bool allow_full, const char* what) {
  const int hi = allow_full ? p : p - 1;
  if (d < 1 || d > hi)
    throw ParameterError(std::string(what) + "=" + std::to_string(d) +
                         " outside [1, " + std::to_string(hi) + "]");
}

void check_dims(const PcaDecomposition& dec, const Spectrum& spectrum) {
  if (dec.p() != spectrum.p())
    throw DataError("decomposition dimension does not match the spectrum");
}

// W(k, i) = <e_k, u_hat_i>^2 = ||P_k P_hat_i||_2^2.
Eigen::MatrixXd squared_coordinates(const PcaDecomposition& dec) {
  return dec.U_hat.cwiseAbs2();
}

// P_hat_{>d} f, computed from the trailing eigenvectors so that no
// cancellation occurs when f is nearly inside the leading span.
Eigen::VectorXd tail_projection(const PcaDecomposition& dec,
                                const Eigen::VectorXd& f, int d) {
  const int p = dec.p();
  if (d >= p) return Eigen::VectorXd::Zero(p);
  const auto U = dec.U_hat.rightCols(p - d);
  return U * (U.transpose() * f);
}

Eigen::VectorXd head_projection(const PcaDecomposition& dec,
                                const Eigen::VectorXd& f, int d) {
  if (d <= 0) return Eigen::VectorXd::Zero(dec.p());
  const auto U = dec.U_hat.leftCols(d);
  return U * (U.transpose() * f);
}

double weighted_norm2(const Eigen::VectorXd& lambda, const Eigen::VectorXd& v) {
  return (lambda.array() * v.array().square()).sum();
}

// E_{<=d}(mu) and E_{>d}(mu) from squared eigenvector coordinates.
ExcessSplit split_terms(const Eigen::MatrixXd& W, const Eigen::VectorXd& lambda,
                        int d, double mu) {
  const int p = static_cast<int>(lambda.size());
  ExcessSplit out;
  for (int j = 0; j < d; ++j) {
    const double mass = W.row(j).segment(d, p - d).sum();
    out.le += (lambda(j) - mu) * mass;
  }
  for (int k = d; k < p; ++k) {
    const double mass = W.row(k).head(d).sum();
    out.gt += (mu - lambda(k)) * mass;
  }
  return out;
}

// tr(P_hat_j Sigma) for every j.
Eigen::VectorXd projected_traces(const Eigen::MatrixXd& W,
                                 const Eigen::VectorXd& lambda) {
  return W.transpose() * lambda;
}

int halving_count(const PcaDecomposition& dec, const Spectrum& spectrum, int d) {
  int count = 0;
  for (int j = 1; j <= d; ++j)
    if (dec.lambda_hat(j - 1) < spectrum.lambda(j) / 2.0) ++count;
  return count;
}

bool threshold_event(const PcaDecomposition& dec, const Spectrum& spectrum, int d) {
  return dec.lambda_hat(d - 1) >= spectrum.lambda(d) / 2.0;
}

// M = sum_{j<=d} lambda_hat_j^{-1} u_hat_j u_hat_j^T.
Eigen::MatrixXd pseudo_inverse(const PcaDecomposition& dec, int d) {
  const auto U = dec.U_hat.leftCols(d);
  const Eigen::VectorXd inv = dec.lambda_hat.head(d).cwiseInverse();
  return U * inv.asDiagonal() * U.transpose();
}

struct LinearMaps {
  Eigen::VectorXd bias_vector;  // (A - I) f
  Eigen::MatrixXd B;            // M X^T / n
};

LinearMaps linear_maps(const PcaDecomposition& dec, const Eigen::MatrixXd& X,
                       const GroundTruth& gt, int d, int n) {
  if (X.rows() != n || X.cols() != gt.p())
    throw DataError("design shape does not match (n, p)");
  check_cut(d, gt.p(), true, "d");
  if (!(dec.lambda_hat(d - 1) > 0.0))
    throw DegenerateFitError("lambda_hat_d = 0: conditional risk is undefined");
  const double nn = static_cast<double>(n);
  const Eigen::MatrixXd M = pseudo_inverse(dec, d);
  const Eigen::VectorXd gram_f = X.transpose() * (X * gt.f) / nn;
  LinearMaps out;
  out.bias_vector = M * gram_f - gt.f;
  out.B = M * X.transpose() / nn;
  return out;
}

}  // namespace

double identity_residual(double lhs, double rhs, std::initializer_list<double> terms) {
  double scale = std::max(std::abs(lhs), std::abs(rhs));
  for (double t : terms) scale = std::max(scale, std::abs(t));
  return std::abs(lhs - rhs) / std::max(scale, kResidualFloor);
}

InequalityCheck make_check(std::string name, double lhs, double rhs,
                           bool evaluated, double rel_tol) {
  InequalityCheck c;
  c.name = std::move(name);
  c.lhs = lhs;
  c.rhs = rhs;
  c.evaluated = evaluated && std::isfinite(lhs) && std::isfinite(rhs);
  if (!c.evaluated) {
    c.holds = true;
    return c;
  }
  const double scale =
      std::max({std::abs(lhs), std::abs(rhs), kResidualFloor});
  c.holds = lhs <= rhs + rel_tol * scale;
  return c;
}

double prediction_error(const Eigen::VectorXd& coeffs, const GroundTruth& gt) {
  if (coeffs.size() != gt.p()) throw DataError("coefficient length does not match p");
  return weighted_norm2(gt.spectrum.values(), coeffs - gt.f);
}

double h_norm_error(const Eigen::VectorXd& coeffs, const GroundTruth& gt) {
  if (coeffs.size() != gt.p()) throw DataError("coefficient length does not match p");
  return (coeffs - gt.f).squaredNorm();
}

BiasVariance bias_variance(const PcaDecomposition& dec, const GroundTruth& gt,
                           int d, int n) {
  check_dims(dec, gt.spectrum);
  check_cut(d, gt.p(), true, "d");
  if (n < 1) throw ParameterError("n must be positive");
  if (!(dec.lambda_hat(d - 1) > 0.0))
    throw DegenerateFitError("lambda_hat_d = 0: bias-variance split is undefined");

  const Eigen::VectorXd& lambda = gt.spectrum.values();
  BiasVariance out;
  out.bias = weighted_norm2(lambda, tail_projection(dec, gt.f, d));
  const Eigen::VectorXd traces = projected_traces(squared_coordinates(dec), lambda);
  double acc = 0.0;
  for (int j = 0; j < d; ++j) acc += traces(j) / dec.lambda_hat(j);
  out.variance = gt.sigma2 / static_cast<double>(n) * acc;
  return out;
}

double conditional_mse_direct(const PcaDecomposition& dec, const Eigen::MatrixXd& X,
                              const GroundTruth& gt, int d, int n) {
  check_dims(dec, gt.spectrum);
  const LinearMaps maps = linear_maps(dec, X, gt, d, n);
  const Eigen::VectorXd& lambda = gt.spectrum.values();
  const double bias = weighted_norm2(lambda, maps.bias_vector);
  const Eigen::VectorXd row_norms = maps.B.rowwise().squaredNorm();
  return bias + gt.sigma2 * lambda.dot(row_norms);
}

double conditional_h_error_direct(const PcaDecomposition& dec,
                                  const Eigen::MatrixXd& X,
                                  const GroundTruth& gt, int d, int n) {
  check_dims(dec, gt.spectrum);
  const LinearMaps maps = linear_maps(dec, X, gt, d, n);
  return maps.bias_vector.squaredNorm() + gt.sigma2 * maps.B.squaredNorm();
}

double bias_identity_rhs(const PcaDecomposition& dec, const GroundTruth& gt, int d) {
  check_dims(dec, gt.spectrum);
  check_cut(d, gt.p(), true, "d");
  const int p = gt.p();
  const Eigen::VectorXd root = gt.spectrum.values().cwiseSqrt();
  const Eigen::VectorXd tail = tail_projection(dec, gt.f, d);
  const Eigen::VectorXd head = head_projection(dec, gt.f, d);

  Eigen::VectorXd w(p);
  for (int j = 0; j < d; ++j) w(j) = root(j) * tail(j);
  for (int k = d; k < p; ++k) w(k) = root(k) * gt.f(k) - root(k) * head(k);
  return w.squaredNorm();
}

ExcessRisk excess_risk(const PcaDecomposition& dec, const Spectrum& spectrum, int d) {
  check_dims(dec, spectrum);
  check_cut(d, spectrum.p(), true, "d");
  const int p = spectrum.p();
  const Eigen::VectorXd& lambda = spectrum.values();
  const Eigen::MatrixXd W = squared_coordinates(dec);

  ExcessRisk out;
  const ExcessSplit zero = split_terms(W, lambda, d, 0.0);
  out.excess = zero.le + zero.gt;
  out.leading_lost = zero.le;
  out.trailing_gained = -zero.gt;
  const Eigen::VectorXd traces = projected_traces(W, lambda);
  out.recon_empirical = traces.segment(d, p - d).sum();
  out.recon_population = spectrum.tail_trace(d);
  out.via_reconstruction = out.recon_empirical - out.recon_population;
  return out;
}

ExcessSplit excess_risk_split(const PcaDecomposition& dec, const Spectrum& spectrum,
                              int d, double mu) {
  check_dims(dec, spectrum);
  check_cut(d, spectrum.p(), true, "d");
  return split_terms(squared_coordinates(dec), spectrum.values(), d, mu);
}

// ---------------------------------------------------------------------------

std::vector<InequalityCheck> BiasBounds::checks(double rel_tol) const {
  return {
      make_check("bias_le_decomposition", lhs, decomposition, true, rel_tol),
      make_check("bias_le_operator_form", lhs, operator_form, true, rel_tol),
      make_check("bias_le_excess_form", lhs, excess_form, true, rel_tol),
  };
}

BiasBounds bias_bounds(const PcaDecomposition& dec, const GroundTruth& gt, int d,
                       int r) {
  check_dims(dec, gt.spectrum);
  check_cut(d, gt.p(), false, "d");
  if (r < 1 || r > d) throw ParameterError("cut r must satisfy 1 <= r <= d");
  const int p = gt.p();
  const Eigen::VectorXd& lambda = gt.spectrum.values();
  const double next = lambda(r);
  const double f_norm2 = gt.f.squaredNorm();

  BiasBounds out;
  const Eigen::VectorXd v = tail_projection(dec, gt.f, d);
  out.lhs = weighted_norm2(lambda, v);

  double weighted = 0.0;
  for (int j = 0; j < r; ++j) weighted += (lambda(j) - next) * v(j) * v(j);
  out.decomposition = weighted + next * v.squaredNorm();

  Eigen::MatrixXd block = dec.U_hat.block(0, r, r, p - r);
  for (int j = 0; j < r; ++j) block.row(j) *= std::sqrt(lambda(j) - next);
  const double op = spectral_norm(block);
  out.operator_form = next * f_norm2 + op * op * f_norm2;

  const ExcessSplit split = split_terms(squared_coordinates(dec), lambda, r, next);
  out.excess_form = next * f_norm2 + split.le * f_norm2;
  return out;
}

std::vector<InequalityCheck> SourceBiasChain::checks(double rel_tol) const {
  return {
      make_check("source_shrink", shrink_lhs, shrink_rhs, true, rel_tol),
      make_check("source_split", split_lhs, split_rhs, true, rel_tol),
      make_check("source_tail", tail_lhs, tail_rhs, true, rel_tol),
      make_check("source_rotation_mid", rotation_lhs, rotation_mid, true, rel_tol),
      make_check("source_rotation", rotation_lhs, rotation_rhs, true, rel_tol),
      make_check("source_eigen", eigen_worst_lhs, eigen_worst_rhs, true, rel_tol),
      make_check("source_total", total_lhs, total_rhs, true, rel_tol),
  };
}

SourceBiasChain source_bias_chain(const PcaDecomposition& dec, const GroundTruth& gt,
                                  int d, int r) {
  check_dims(dec, gt.spectrum);
  check_cut(d, gt.p(), false, "d");
  if (r < 1 || r > d) throw ParameterError("cut r must satisfy 1 <= r <= d");
  if (gt.s < 0.0) throw ParameterError("smoothness s must be non-negative");
  const int p = gt.p();
  const Eigen::VectorXd& lambda = gt.spectrum.values();
  const double s = gt.s;
  const double next = lambda(r);
  const double next_s = std::pow(next, s);
  const double next_2s = std::pow(next, 2.0 * s);
  const double h_norm2 = gt.h.squaredNorm();
  const Eigen::MatrixXd W = squared_coordinates(dec);

  SourceBiasChain out;
  const Eigen::VectorXd tail_d = tail_projection(dec, gt.f, d);
  const Eigen::VectorXd tail_r = tail_projection(dec, gt.f, r);
  out.shrink_lhs = next * tail_d.squaredNorm();
  out.shrink_rhs = next * tail_r.squaredNorm();

  Eigen::VectorXd f_head = Eigen::VectorXd::Zero(p);
  f_head.head(r) = gt.f.head(r);
  const Eigen::VectorXd rotated_f = tail_projection(dec, f_head, r);
  out.split_lhs = tail_r.squaredNorm();
  out.rotation_lhs = rotated_f.squaredNorm();
  out.tail_lhs = gt.f.segment(r, p - r).squaredNorm();
  out.split_rhs = 2.0 * out.tail_lhs + 2.0 * out.rotation_lhs;
  out.tail_rhs = next_2s * h_norm2;

  // sum_{j<=r} (lambda_j^s - lambda_{r+1}^s) P_j h and P_{<=r} h.
  Eigen::VectorXd shifted = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd h_head = Eigen::VectorXd::Zero(p);
  double weighted_mass = 0.0;  // sum (lambda_j^s - lambda_{r+1}^s)^2 ||P_j P_hat_{>r}||^2
  for (int j = 0; j < r; ++j) {
    const double diff = std::pow(lambda(j), s) - next_s;
    shifted(j) = diff * gt.h(j);
    h_head(j) = gt.h(j);
    weighted_mass += diff * diff * W.row(j).segment(r, p - r).sum();
  }
  out.rotation_mid = 2.0 * tail_projection(dec, shifted, r).squaredNorm() +
                     2.0 * next_2s * tail_projection(dec, h_head, r).squaredNorm();
  out.rotation_rhs = 2.0 * weighted_mass * h_norm2 + 2.0 * next_2s * h_norm2;

  // Constant from the mean value theorem, one branch per concavity of x^s.
  out.eigen_constant = s <= 0.5 ? next_2s
                                : 2.0 * s * std::pow(lambda(0), 2.0 * s - 1.0) * next;
  double worst = -std::numeric_limits<double>::infinity();
  out.eigen_worst_lhs = 0.0;
  out.eigen_worst_rhs = 0.0;
  out.eigen_all_hold = true;
  for (int j = 0; j < r; ++j) {
    const double diff = std::pow(lambda(j), s) - next_s;
    const double lhs = next * diff * diff;
    const double rhs = out.eigen_constant * (lambda(j) - next);
    const double scale = std::max({std::abs(lhs), std::abs(rhs), kResidualFloor});
    const double excess = (lhs - rhs) / scale;
    if (excess > worst) {
      worst = excess;
      out.eigen_worst_lhs = lhs;
      out.eigen_worst_rhs = rhs;
    }
  }

  const ExcessSplit split = split_terms(W, lambda, r, next);
  out.total_lhs = weighted_norm2(lambda, tail_d);
  out.total_rhs =
      (std::pow(lambda(0), 2.0 * s) + 4.0 * out.eigen_constant) * split.le * h_norm2 +
      6.0 * next * next_2s * h_norm2;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct GroupedTerms {
  double grouped = 0.0;
  int halvings = 0;
};

GroupedTerms grouped_terms(const PcaDecomposition& dec, const Spectrum& spectrum,
                           const Grouping& grouping, int d) {
  if (grouping.num_blocks() < 1 || grouping.breakpoints.front() != 0)
    throw ParameterError("grouping must start at breakpoint 0 and have a block");
  if (grouping.breakpoints.back() < d || grouping.breakpoints.back() > spectrum.p())
    throw ParameterError("grouping does not cover 1..d inside 1..p");
  for (std::size_t i = 1; i < grouping.breakpoints.size(); ++i)
    if (grouping.breakpoints[i] <= grouping.breakpoints[i - 1])
      throw ParameterError("grouping breakpoints must be strictly increasing");

  const Eigen::VectorXd& lambda = spectrum.values();
  const Eigen::MatrixXd W = squared_coordinates(dec);
  GroupedTerms out;
  for (int l = 2; l <= grouping.num_blocks(); ++l) {
    const int prev = grouping.breakpoints[l - 1];  // r_{l-1}
    const int begin = grouping.block_begin(l);
    const int end = grouping.block_end(l);
    const double pivot = lambda(prev);  // lambda_{r_{l-1}+1}
    double inner = 0.0;
    for (int k = 0; k < prev; ++k) {
      const double mass = W.row(k).segment(begin - 1, end - begin + 1).sum();
      inner += (lambda(k) - pivot) * mass;
    }
    out.grouped += inner / lambda(end - 1);
  }
  out.halvings = halving_count(dec, spectrum, d);
  return out;
}

}  // namespace

VarianceBound variance_bound(const PcaDecomposition& dec, const GroundTruth& gt,
                             const Grouping& grouping, int d, int n) {
  check_dims(dec, gt.spectrum);
  check_cut(d, gt.p(), false, "d");
  if (n < 1) throw ParameterError("n must be positive");
  const Spectrum& spectrum = gt.spectrum;
  const Eigen::VectorXd& lambda = spectrum.values();

  VarianceBound out;
  out.event = threshold_event(dec, spectrum, d);
  const GroupedTerms terms = grouped_terms(dec, spectrum, grouping, d);
  out.grouped = terms.grouped;
  out.halving_count = terms.halvings;
  out.leading = 2.0 * grouping.overshoot * grouping.ratio_bound * d;
  out.rhs = out.leading + 2.0 * out.grouped +
            2.0 * lambda(0) / lambda(d - 1) * out.halving_count;
  if (!out.event || !(dec.lambda_hat(d - 1) > 0.0)) {
    out.lhs = kNaN;
    return out;
  }
  const Eigen::VectorXd traces = projected_traces(squared_coordinates(dec), lambda);
  double acc = 0.0;
  for (int j = 0; j < d; ++j) acc += traces(j) / dec.lambda_hat(j);
  out.lhs = acc;
  return out;
}

Remainders final_remainders(const PcaDecomposition& dec, const GroundTruth& gt,
                            const Grouping& grouping, int d, int r) {
  check_dims(dec, gt.spectrum);
  check_cut(d, gt.p(), false, "d");
  if (r < 1 || r > d) throw ParameterError("cut r must satisfy 1 <= r <= d");
  const Eigen::VectorXd& lambda = gt.spectrum.values();
  Remainders out;
  const ExcessSplit split =
      split_terms(squared_coordinates(dec), lambda, r, lambda(r));
  out.r1 = split.le * gt.h.squaredNorm();
  const GroupedTerms terms = grouped_terms(dec, gt.spectrum, grouping, d);
  out.r2 = terms.grouped + terms.halvings / lambda(d - 1);
  return out;
}

HNormBounds h_norm_bounds(const PcaDecomposition& dec, const Eigen::MatrixXd& X,
                          const GroundTruth& gt, int d, int r, int n) {
  check_dims(dec, gt.spectrum);
  check_cut(d, gt.p(), false, "d");
  if (r < 1 || r > d) throw ParameterError("cut r must satisfy 1 <= r <= d");
  const int p = gt.p();
  const Eigen::VectorXd& lambda = gt.spectrum.values();

  HNormBounds out;
  out.event = threshold_event(dec, gt.spectrum, d);
  out.bias_term = 2.0 * std::pow(lambda(r), 2.0 * gt.s) * gt.h.squaredNorm();
  out.r1 = halving_count(dec, gt.spectrum, d) / lambda(d - 1);
  out.variance_term = 2.0 * gt.sigma2 / static_cast<double>(n) *
                      (lambda.head(d).cwiseInverse().sum() + out.r1);
  // ||P_hat_{<=r} - P_{<=r}||_inf = ||P_{>r} P_hat_{<=r}||_inf for equal ranks.
  const double rot = spectral_norm(dec.U_hat.block(r, 0, p - r, r));
  out.r2 = 2.0 * rot * rot * gt.f.squaredNorm();
  out.rhs = out.bias_term + out.variance_term + out.r2;
  out.lhs = out.event && dec.lambda_hat(d - 1) > 0.0
                ? conditional_h_error_direct(dec, X, gt, d, n)
                : kNaN;
  return out;
}

GapWeights gap_weights(const Spectrum& spectrum, int r, int s) {
  const int p = spectrum.p();
  if (r < 0 || s <= r || s > p)
    throw ParameterError("block J = {r+1..s} needs 0 <= r < s <= p");
  const Eigen::VectorXd& lambda = spectrum.values();
  GapWeights out;
  out.r = r;
  out.s = s;
  out.defined = (r == 0 || lambda(r - 1) > lambda(r)) &&
                (s == p || lambda(s - 1) > lambda(s));
  out.g.resize(p);
  for (int k = 0; k < p; ++k) {
    if (k < r) {
      out.g(k) = lambda(k) - lambda(r);
    } else if (k >= s) {
      out.g(k) = lambda(s - 1) - lambda(k);
    } else {
      const double up = r > 0 ? lambda(r - 1) - lambda(k)
                              : std::numeric_limits<double>::infinity();
      const double down = s < p ? lambda(k) - lambda(s)
                                : std::numeric_limits<double>::infinity();
      out.g(k) = std::min(up, down);
    }
  }
  return out;
}

AlignmentCheck projector_alignment(const PcaDecomposition& dec,
                                   const Eigen::MatrixXd& X,
                                   const Spectrum& spectrum, int r, int s, int n) {
  check_dims(dec, spectrum);
  if (X.rows() != n || X.cols() != spectrum.p())
    throw DataError("design shape does not match (n, p)");
  const int p = spectrum.p();
  const GapWeights weights = gap_weights(spectrum, r, s);
  AlignmentCheck out;
  out.defined = weights.defined;
  if (!out.defined) {
    out.lhs = out.rhs = out.sds_norm = kNaN;
    return out;
  }
  const Eigen::VectorXd& lambda = spectrum.values();
  Eigen::MatrixXd delta = -sample_covariance(X);
  delta.diagonal() += lambda;

  std::vector<int> outside;
  outside.reserve(static_cast<std::size_t>(p - (s - r)));
  for (int k = 0; k < p; ++k)
    if (k < r || k >= s) outside.push_back(k);

  const Eigen::MatrixXd W = squared_coordinates(dec);
  out.eigen_event = true;
  for (int k : outside) {
    out.lhs += weights.g(k) * W.row(k).segment(r, s - r).sum();
    double cross = 0.0;
    for (int j = r; j < s; ++j) {
      cross += delta(j, k) * delta(j, k);
      if (std::abs(dec.lambda_hat(j) - lambda(k)) < std::abs(lambda(j) - lambda(k)) / 2.0)
        out.eigen_event = false;
    }
    out.rhs += cross / weights.g(k);
  }
  out.rhs *= 16.0;

  const auto m = static_cast<Eigen::Index>(outside.size());
  Eigen::MatrixXd sds(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) {
      const int ka = outside[static_cast<std::size_t>(a)];
      const int kb = outside[static_cast<std::size_t>(b)];
      sds(a, b) = delta(ka, kb) / std::sqrt(weights.g(ka) * weights.g(kb));
    }
  out.sds_norm = symmetric_spectral_norm(sds);
  out.event = out.eigen_event && out.sds_norm <= 0.25;
  return out;
}

double isotropic_bias_expectation(int p, int d, double f_norm2) {
  if (p < 1 || d < 0 || d > p) throw ParameterError("need 0 <= d <= p and p >= 1");
  return static_cast<double>(p - d) / static_cast<double>(p) * f_norm2;
}

double excess_risk_bound_rhs(const Spectrum& spectrum, int d, int n,
                             BoundRegime regime, BoundConstants constants) {
  if (n < 1) throw ParameterError("n must be positive");
  if (d < 0 || d > spectrum.p()) throw ParameterError("d outside [0, p]");
  if (d == 0) return 0.0;
  const double nn = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  switch (regime) {
    case BoundRegime::Exponential:
      return constants.C * dd * std::exp(-spectrum.alpha() * dd) / nn;
    case BoundRegime::Polynomial:
      return constants.C * std::pow(dd, 2.0 - spectrum.alpha()) *
             std::log(std::exp(1.0) * dd) / nn;
    case BoundRegime::General: {
      if (d >= spectrum.p()) return 0.0;
      const Eigen::VectorXd& lambda = spectrum.values();
      const double next = lambda(d);
      const double tail = spectrum.tail_trace(d);
      const double trace = spectrum.trace();
      const double gap = lambda(d - 1) - next;
      if (!(gap > 0.0)) return kNaN;
      double main = 0.0;
      double remainder = 0.0;
      for (int j = 0; j < d; ++j) {
        main += lambda(j) * tail / (lambda(j) - next);
        remainder += lambda(j) * trace / (lambda(j) - next);
      }
      const double rel = gap / lambda(d - 1);
      return constants.C * main / nn +
             constants.C * remainder / nn * std::exp(-constants.c * nn * rel * rel);
    }
  }
  return kNaN;
}

}  // namespace pcrlab
