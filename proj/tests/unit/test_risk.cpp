#include "pcrlab/datagen.hpp"
#include "pcrlab/errors.hpp"
#include "pcrlab/estimators.hpp"
#include "pcrlab/risk.hpp"

#include <Eigen/QR>
#include <doctest.h>

#include <cmath>

using namespace pcrlab;

namespace {

using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

struct Fixture {
  GroundTruth gt;
  DesignSample sample;
  PcaDecomposition dec;
};

Fixture random_fixture(SpectrumKind kind, int p, int n, double s, double sigma2,
                       std::uint64_t seed, Family family = Family::Gaussian) {
  const double alpha = kind == SpectrumKind::Exponential ? 0.8 : 2.0;
  const Spectrum sp = make_spectrum(kind, alpha, p, 1.5, seed);
  GroundTruth gt = make_ground_truth(sp, s, 1.0, sigma2, seed + 1, HMode::RandomSphere);
  DesignSample sample = sample_design(gt, n, family, seed + 2);
  PcaDecomposition dec = pca(sample.X);
  return {std::move(gt), std::move(sample), std::move(dec)};
}

// Design with Sigma_hat = diag(mu) exactly, so U_hat = I.
Eigen::MatrixXd axis_design(const Eigen::VectorXd& mu, int copies) {
  const int p = static_cast<int>(mu.size());
  const int n = copies * p;
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, p);
  for (int c = 0; c < copies; ++c)
    for (int j = 0; j < p; ++j) X(c * p + j, j) = std::sqrt(p * mu(j));
  return X;
}

// Conditional MSE through the generic least-squares map G = U_d (X U_d)^+.
double brute_conditional_mse(const Fixture& fx, int d) {
  const int n = static_cast<int>(fx.sample.X.rows());
  const Eigen::MatrixXd Ud = fx.dec.U_hat.leftCols(d);
  const Eigen::MatrixXd XU = fx.sample.X * Ud;
  const Eigen::MatrixXd pinv =
      XU.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::MatrixXd G = Ud * pinv;  // p x n
  const Eigen::VectorXd& lambda = fx.gt.spectrum.values();
  const Eigen::VectorXd bias = G * (fx.sample.X * fx.gt.f) - fx.gt.f;
  double bias2 = 0.0;
  for (int j = 0; j < bias.size(); ++j) bias2 += lambda(j) * bias(j) * bias(j);
  double var = 0.0;
  for (int j = 0; j < G.rows(); ++j) var += lambda(j) * G.row(j).squaredNorm();
  (void)n;
  return bias2 + fx.gt.sigma2 * var;
}

// tr(Sigma (P_d - P_hat_d)) with full projector matrices in long double.
long double brute_excess(const Fixture& fx, int d) {
  const int p = fx.gt.p();
  const LMat U = fx.dec.U_hat.cast<long double>();
  const LMat Ph = U.leftCols(d) * U.leftCols(d).transpose();
  long double out = 0;
  for (int j = 0; j < p; ++j) {
    const long double lam = fx.gt.spectrum.values()(j);
    out += lam * ((j < d ? 1.0L : 0.0L) - Ph(j, j));
  }
  return out;
}

}  // namespace

TEST_CASE("comparison helpers") {
  CHECK(identity_residual(1.0, 1.0, {1.0}) == 0.0);
  CHECK(identity_residual(1.0, 1.5, {2.0, -4.0}) == doctest::Approx(0.125));
  CHECK(identity_residual(0.0, 1e-20, {0.0}) == doctest::Approx(1e-6));
  CHECK(make_check("a", 1.0, 1.0, true, 0.0).holds);
  CHECK(make_check("a", 1.0 + 1e-13, 1.0, true, 1e-12).holds);
  CHECK_FALSE(make_check("a", 1.0 + 1e-11, 1.0, true, 1e-12).holds);
  CHECK(make_check("a", 2.0, 1.0, false, 0.0).holds);
}

TEST_CASE("error functionals") {
  const Spectrum sp = make_spectrum(SpectrumKind::Polynomial, 2.0, 5);
  const GroundTruth gt = make_ground_truth(sp, 0.0, 1.0, 0.0, 3, HMode::RandomSphere);
  CHECK(prediction_error(gt.f, gt) == 0.0);
  double norm = 0.0;
  for (int j = 0; j < 5; ++j) norm += sp.values()(j) * gt.f(j) * gt.f(j);
  CHECK(prediction_error(Eigen::VectorXd::Zero(5), gt) == doctest::Approx(norm).epsilon(1e-15));
  CHECK(h_norm_error(Eigen::VectorXd::Zero(5), gt) == doctest::Approx(1.0).epsilon(1e-15));

  const Spectrum iso = make_spectrum(SpectrumKind::Isotropic, 0.0, 5);
  const GroundTruth gi = make_ground_truth(iso, 0.0, 1.0, 0.0, 3, HMode::RandomSphere);
  const Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(5, -1.0, 1.0);
  CHECK(prediction_error(g, gi) == doctest::Approx(h_norm_error(g, gi)).epsilon(1e-15));
}

TEST_CASE("bias-variance equals the conditional MSE of independent oracles") {
  int count = 0;
  for (auto kind : {SpectrumKind::Exponential, SpectrumKind::Polynomial,
                    SpectrumKind::ApproxPolynomial, SpectrumKind::Isotropic}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Fixture fx = random_fixture(kind, 14, 30 + 7 * static_cast<int>(seed), 0.5, 0.7,
                                        seed * 10, static_cast<Family>(seed % 3));
      const int n = static_cast<int>(fx.sample.X.rows());
      for (int d : {1, 4, 9, 14}) {
        const BiasVariance bv = bias_variance(fx.dec, fx.gt, d, n);
        const double direct = conditional_mse_direct(fx.dec, fx.sample.X, fx.gt, d, n);
        const double brute = brute_conditional_mse(fx, d);
        CHECK(bv.bias + bv.variance == doctest::Approx(direct).epsilon(1e-10));
        CHECK(bv.bias + bv.variance == doctest::Approx(brute).epsilon(1e-10));
        CHECK(bias_identity_rhs(fx.dec, fx.gt, d) == doctest::Approx(bv.bias).epsilon(1e-10));
        ++count;
      }
    }
  }
  CHECK(count == 80);
}

TEST_CASE("noise-free and full-rank conditional MSE") {
  const Fixture fx = random_fixture(SpectrumKind::Polynomial, 8, 40, 0.0, 0.0, 3);
  const BiasVariance bv = bias_variance(fx.dec, fx.gt, 5, 40);
  CHECK(bv.variance == 0.0);
  const PcrFit fit = pcr_fit(fx.dec, fx.sample.X, fx.sample.Y, 5, fx.gt.spectrum,
                             Thresholding::None);
  CHECK(conditional_mse_direct(fx.dec, fx.sample.X, fx.gt, 5, 40) ==
        doctest::Approx(prediction_error(fit.coeffs, fx.gt)).epsilon(1e-10));

  const Fixture noisy = random_fixture(SpectrumKind::Polynomial, 8, 40, 0.0, 1.0, 3);
  const BiasVariance full = bias_variance(noisy.dec, noisy.gt, 8, 40);
  CHECK(full.bias <= 1e-25);
  CHECK(conditional_mse_direct(noisy.dec, noisy.sample.X, noisy.gt, 8, 40) ==
        doctest::Approx(full.variance).epsilon(1e-10));
}

TEST_CASE("axis-aligned design: P_hat = P") {
  const Spectrum sp = make_spectrum(SpectrumKind::Polynomial, 2.0, 6);
  const GroundTruth gt = make_ground_truth(sp, 0.5, 1.0, 1.0, 4, HMode::RandomSphere);
  const Eigen::MatrixXd X = axis_design(sp.values(), 3);
  const int n = static_cast<int>(X.rows());
  const PcaDecomposition dec = pca(X);
  REQUIRE((dec.U_hat - Eigen::MatrixXd::Identity(6, 6)).norm() == 0.0);
  const int d = 3;
  double tail = 0.0;
  for (int k = d; k < 6; ++k) tail += sp.values()(k) * gt.f(k) * gt.f(k);
  const BiasVariance bv = bias_variance(dec, gt, d, n);
  CHECK(bv.bias == doctest::Approx(tail).epsilon(1e-14));
  CHECK(bias_identity_rhs(dec, gt, d) == doctest::Approx(tail).epsilon(1e-14));
  CHECK(excess_risk(dec, sp, d).excess == 0.0);
  const ExcessSplit split = excess_risk_split(dec, sp, d, sp.lambda(d + 1));
  CHECK(split.le == 0.0);
  CHECK(split.gt == 0.0);

  const BiasBounds bb = bias_bounds(dec, gt, d, d);
  CHECK(bb.lhs <= sp.lambda(d + 1) * gt.f.squaredNorm());
  CHECK(bb.operator_form - sp.lambda(d + 1) * gt.f.squaredNorm() == doctest::Approx(0.0));

  const Grouping g = build_grouping(sp, d, 2.0);
  const Remainders rem = final_remainders(dec, gt, g, d, d);
  CHECK(rem.r1 == 0.0);
  CHECK(rem.r2 == 0.0);
  const VarianceBound vb = variance_bound(dec, gt, g, d, n);
  CHECK(vb.event);
  CHECK(vb.lhs == doctest::Approx(d).epsilon(1e-14));
  CHECK(vb.rhs >= 2.0 * d);

  const AlignmentCheck al = projector_alignment(dec, X, sp, 0, d, n);
  CHECK(al.defined);
  CHECK(al.event);
  CHECK(al.lhs == 0.0);
  CHECK(al.rhs == 0.0);
}

TEST_CASE("h-norm bound terms vanish on the trivial case") {
  const Spectrum sp = make_spectrum(SpectrumKind::Polynomial, 2.0, 6);
  GroundTruth gt = make_ground_truth(sp, 0.0, 1.0, 0.0, 4, HMode::RandomSphere);
  gt.f.tail(4).setZero();
  gt.h = gt.f;
  const Eigen::MatrixXd X = axis_design(sp.values(), 2);
  const PcaDecomposition dec = pca(X);
  const HNormBounds hb = h_norm_bounds(dec, X, gt, 3, 2, static_cast<int>(X.rows()));
  CHECK(hb.event);
  CHECK(hb.r2 == 0.0);
  CHECK(hb.variance_term == 0.0);
  CHECK(hb.lhs == doctest::Approx(0.0));
}

TEST_CASE("excess risk: two routes and brute force") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Fixture fx = random_fixture(static_cast<SpectrumKind>(seed % 4), 20, 35, 0.0, 1.0,
                                      seed);
    for (int d = 1; d <= 20; d += 3) {
      const ExcessRisk ex = excess_risk(fx.dec, fx.gt.spectrum, d);
      const double brute = static_cast<double>(brute_excess(fx, d));
      const double scale = std::max({ex.recon_empirical, ex.leading_lost, 1e-14});
      CHECK(ex.excess >= -1e-15 * scale);
      // The naive route cancels at the scale of tr(Sigma).
      CHECK(std::abs(ex.excess - brute) <= 1e-12 * fx.gt.spectrum.trace());
      CHECK(std::abs(ex.excess - ex.via_reconstruction) <= 1e-12 * scale);
      CHECK(std::abs(ex.excess - (ex.leading_lost - ex.trailing_gained)) <= 1e-12 * scale);
      // Splitting at any mu gives the same total.
      for (double mu : {0.0, 0.3, fx.gt.spectrum.lambda(1)}) {
        const ExcessSplit sp = excess_risk_split(fx.dec, fx.gt.spectrum, d, mu);
        CHECK(std::abs(sp.le + sp.gt - ex.excess) <= 1e-12 * std::max(scale, mu * d));
      }
      if (d < 20 && fx.gt.spectrum.lambda(d) > fx.gt.spectrum.lambda(d + 1)) {
        const ExcessSplit at = excess_risk_split(fx.dec, fx.gt.spectrum, d,
                                                 fx.gt.spectrum.lambda(d + 1));
        CHECK(at.le >= 0.0);
        CHECK(at.gt >= 0.0);
      }
    }
    CHECK(excess_risk(fx.dec, fx.gt.spectrum, 20).excess == doctest::Approx(0.0));
  }
}

TEST_CASE("deterministic bias bounds hold on random instances") {
  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    const double s = (seed % 4) * 0.5;
    const Fixture fx = random_fixture(static_cast<SpectrumKind>(seed % 4), 16, 25 + seed, s,
                                      0.5, 100 + seed, static_cast<Family>(seed % 3));
    for (int d = 2; d < 16; d += 3) {
      for (int r = 1; r <= d; r += 2) {
        for (const auto& c : bias_bounds(fx.dec, fx.gt, d, r).checks(1e-12)) {
          INFO(c.name << " d=" << d << " r=" << r);
          CHECK(c.holds);
        }
        for (const auto& c : source_bias_chain(fx.dec, fx.gt, d, r).checks(1e-12)) {
          INFO(c.name << " d=" << d << " r=" << r);
          CHECK(c.holds);
        }
      }
    }
  }
}

TEST_CASE("zero target makes every bias bound zero") {
  Fixture fx = random_fixture(SpectrumKind::Polynomial, 10, 20, 0.0, 1.0, 5);
  fx.gt.f.setZero();
  fx.gt.h.setZero();
  const BiasBounds bb = bias_bounds(fx.dec, fx.gt, 4, 2);
  CHECK(bb.lhs == 0.0);
  CHECK(bb.decomposition == 0.0);
  CHECK(bb.operator_form == 0.0);
  CHECK(bb.excess_form == 0.0);
  CHECK(bias_identity_rhs(fx.dec, fx.gt, 4) == 0.0);
  const SourceBiasChain chain = source_bias_chain(fx.dec, fx.gt, 4, 2);
  CHECK(chain.total_lhs == 0.0);
  CHECK(chain.total_rhs == 0.0);
}

TEST_CASE("variance bound on random instances") {
  int on_event = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Fixture fx = random_fixture(SpectrumKind::Polynomial, 20, 200, 0.0, 1.0, 300 + seed);
    for (double c2 : {1.0, 2.0, 4.0}) {
      const Grouping g = build_grouping(fx.gt.spectrum, 6, c2);
      const VarianceBound vb = variance_bound(fx.dec, fx.gt, g, 6, 200);
      if (!vb.event) continue;
      ++on_event;
      CHECK(vb.lhs <= vb.rhs * (1 + 1e-12));
    }
  }
  CHECK(on_event > 0);
}

TEST_CASE("isotropic single block variance bound") {
  const Fixture fx = random_fixture(SpectrumKind::Isotropic, 12, 400, 0.0, 1.0, 77);
  const Grouping g = build_grouping(fx.gt.spectrum, 5, 1.0);
  REQUIRE(g.num_blocks() == 1);
  const VarianceBound vb = variance_bound(fx.dec, fx.gt, g, 5, 400);
  REQUIRE(vb.event);
  CHECK(vb.grouped == 0.0);
  CHECK(vb.halving_count == 0.0);
  CHECK(vb.rhs == 10.0);
  CHECK(vb.lhs <= 10.0);
}

TEST_CASE("projector alignment holds on its event") {
  int on_event = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Fixture fx = random_fixture(SpectrumKind::Exponential, 8, 2000, 0.0, 1.0, 500 + seed);
    for (auto [r, s] : {std::pair{0, 2}, std::pair{2, 4}, std::pair{1, 3}}) {
      const AlignmentCheck al = projector_alignment(fx.dec, fx.sample.X, fx.gt.spectrum, r, s,
                                                    2000);
      REQUIRE(al.defined);
      if (!al.event) continue;
      ++on_event;
      CHECK(al.lhs <= al.rhs * (1 + 1e-12));
    }
  }
  CHECK(on_event > 0);
  const Fixture iso = random_fixture(SpectrumKind::Isotropic, 6, 50, 0.0, 1.0, 1);
  CHECK_FALSE(projector_alignment(iso.dec, iso.sample.X, iso.gt.spectrum, 0, 2, 50).defined);
}

TEST_CASE("gap weights") {
  const Spectrum sp = make_spectrum(SpectrumKind::Polynomial, 2.0, 5);
  const GapWeights w = gap_weights(sp, 1, 3);
  REQUIRE(w.defined);
  CHECK(w.g(0) == doctest::Approx(1.0 - 0.25));
  CHECK(w.g(3) == doctest::Approx(1.0 / 9 - 1.0 / 16));
  CHECK(w.g(4) == doctest::Approx(1.0 / 9 - 1.0 / 25));
}

TEST_CASE("isotropic bias expectation") {
  CHECK(isotropic_bias_expectation(10, 4, 1.0) == doctest::Approx(0.6));
  CHECK(isotropic_bias_expectation(20, 5, 1.0) == doctest::Approx(0.75));
  CHECK(isotropic_bias_expectation(10, 10, 3.0) == 0.0);
  CHECK(isotropic_bias_expectation(10, 0, 3.0) == 3.0);
}

TEST_CASE("excess risk reference curves") {
  const Spectrum e = make_spectrum(SpectrumKind::Exponential, 1.0, 30);
  CHECK(excess_risk_bound_rhs(e, 5, 1000, BoundRegime::Exponential, {}) ==
        doctest::Approx(5 * std::exp(-5.0) / 1000).epsilon(1e-14));
  const Spectrum p = make_spectrum(SpectrumKind::Polynomial, 2.0, 30);
  CHECK(excess_risk_bound_rhs(p, 4, 1000, BoundRegime::Polynomial, {}) ==
        doctest::Approx(std::log(4 * std::exp(1.0)) / 1000).epsilon(1e-14));
  CHECK(excess_risk_bound_rhs(p, 0, 1000, BoundRegime::Polynomial, {}) == 0.0);
  CHECK(excess_risk_bound_rhs(p, 0, 1000, BoundRegime::General, {}) == 0.0);
}

TEST_CASE("degenerate decomposition is reported") {
  const Spectrum sp = make_spectrum(SpectrumKind::Polynomial, 2.0, 6);
  const GroundTruth gt = make_ground_truth(sp, 0.0, 1.0, 1.0, 4, HMode::RandomSphere);
  Eigen::VectorXd mu = sp.values();
  mu(5) = 0.0;  // last column of the design is identically zero
  const Eigen::MatrixXd X = axis_design(mu, 2);
  const PcaDecomposition dec = pca(X);
  REQUIRE(dec.lambda_hat(5) == 0.0);
  CHECK_THROWS_AS(bias_variance(dec, gt, 6, static_cast<int>(X.rows())), DegenerateFitError);
  CHECK_NOTHROW(bias_variance(dec, gt, 5, static_cast<int>(X.rows())));
}
