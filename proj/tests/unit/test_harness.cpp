#include "pcrlab/errors.hpp"
#include "pcrlab/harness.hpp"
#include "pcrlab/rng.hpp"

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>

using namespace pcrlab;

namespace {

StudyConfig small_config() {
  StudyConfig c;
  c.spectrum = SpectrumKind::Polynomial;
  c.alpha = 2.0;
  c.p = 12;
  c.n_grid = {40, 80};
  c.d_values = {4};
  c.replicates = 6;
  c.seed = 77;
  c.threads = 1;
  return c;
}

bool same_columns(const RiskReport& a, const RiskReport& b) {
  const auto ca = a.flatten();
  const auto cb = b.flatten();
  if (ca.size() != cb.size()) return false;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    if (ca[i].first != cb[i].first) return false;
    const double x = ca[i].second, y = cb[i].second;
    if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
  }
  return a.seed == b.seed;
}

}  // namespace

TEST_CASE("d rules") {
  StudyConfig c;
  c.p = 100;
  c.alpha = 2.0;
  c.s = 0.0;
  c.d_rule = DRule::Power;
  const std::pair<int, int> power[] = {{256, 7},   {512, 8},   {1024, 11},
                                       {2048, 13}, {4096, 16}, {8192, 21}};
  for (auto [n, d] : power) CHECK(resolve_d(c, n).front() == d);

  c.spectrum = SpectrumKind::Exponential;
  c.alpha = 1.0;
  c.d_rule = DRule::Logarithmic;
  CHECK(resolve_d(c, 256).front() == 6);
  CHECK(resolve_d(c, 8192).front() == 10);

  c.d_rule = DRule::Fixed;
  c.d_values = {3, 5};
  CHECK(resolve_d(c, 10) == std::vector<int>{3, 5});

  c.p = 5;
  c.d_rule = DRule::Logarithmic;
  CHECK_THROWS_AS(resolve_d(c, 100000), ParameterError);
}

TEST_CASE("config validation") {
  StudyConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  c.d_values = {13};
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = small_config();
  c.c2 = 0.5;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = small_config();
  c.n_grid = {80, 40};
  CHECK_THROWS_AS(c.validate(), ParameterError);
}

TEST_CASE("replicates are deterministic") {
  const StudyConfig c = small_config();
  const RiskReport a = run_replicate(c, 40, 3);
  const RiskReport b = run_replicate(c, 40, 3);
  const RiskReport other = run_replicate(c, 40, 4);
  CHECK(same_columns(a, b));
  CHECK_FALSE(same_columns(a, other));
  CHECK(a.seed == replicate_seed(c.seed, 40, 3));
  CHECK(a.seed == derive_seed(c.seed, 40, 3));
}

TEST_CASE("noiseless full-dimension fit is exact") {
  StudyConfig c = small_config();
  c.sigma2 = 0.0;
  c.d_values = {12};
  const RiskReport r = run_replicate(c, 400, 0);
  CHECK_FALSE(r.degenerate);
  const GroundTruth gt = make_study_truth(c);
  double target = 0.0;
  for (int j = 0; j < c.p; ++j) target += gt.spectrum.values()(j) * gt.f(j) * gt.f(j);
  CHECK(r.pred_error_raw <= 1e-16 * target);
}

TEST_CASE("replicate suites: identities and inequalities") {
  StudyConfig c = small_config();
  c.s = 1.0;
  for (int i = 0; i < 5; ++i) {
    const RiskReport r = run_replicate(c, 80, i);
    REQUIRE_FALSE(r.degenerate);
    CHECK(r.identities.size() >= 8);
    CHECK(r.max_identity_residual() <= 1e-10);
    CHECK(r.violation_count() == 0);
  }
}

TEST_CASE("mc_study is bit-identical across thread counts") {
  StudyConfig c = small_config();
  const StudyReport one = mc_study(c);
  c.threads = 3;
  const StudyReport three = mc_study(c);
  REQUIRE(one.points.size() == 2);
  for (std::size_t k = 0; k < one.points.size(); ++k) {
    const auto& a = one.points[k];
    const auto& b = three.points[k];
    REQUIRE(a.reports.size() == b.reports.size());
    for (std::size_t i = 0; i < a.reports.size(); ++i)
      CHECK(same_columns(a.reports[i], b.reports[i]));
    REQUIRE(a.stats.size() == b.stats.size());
    for (std::size_t i = 0; i < a.stats.size(); ++i) {
      const double x = a.stats[i].mean, y = b.stats[i].mean;
      CHECK((x == y || (std::isnan(x) && std::isnan(y))));
    }
  }
}

TEST_CASE("single replicate has undefined standard errors") {
  StudyConfig c = small_config();
  c.replicates = 1;
  const StudyReport r = mc_study(c);
  const Aggregate* bias = r.points.front().stat("bias");
  REQUIRE(bias != nullptr);
  CHECK(bias->count == 1);
  CHECK(std::isnan(bias->se));
}

TEST_CASE("aggregate_columns skips NaN") {
  std::vector<RiskReport> reps(3);
  reps[0].bias = 1.0;
  reps[1].bias = 2.0;
  reps[2].bias = std::nan("");
  reps[0].variance = 1.0;
  reps[1].variance = 3.0;
  reps[2].variance = 5.0;
  const auto agg = aggregate_columns(reps);
  const auto find = [&](const char* name) {
    for (const auto& a : agg)
      if (a.name == name) return a;
    FAIL("missing column");
    return Aggregate{};
  };
  const Aggregate b = find("bias");
  CHECK(b.count == 2);
  CHECK(b.mean == 1.5);
  CHECK(b.se == doctest::Approx(0.5));
  const Aggregate v = find("variance");
  CHECK(v.count == 3);
  CHECK(v.mean == 3.0);
  CHECK(v.se == doctest::Approx(2.0 / std::sqrt(3.0)));
}

TEST_CASE("fit_slope") {
  std::vector<double> x{1, 2, 3, 4, 5}, y;
  for (double v : x) y.push_back(-2.0 * v / 3.0 + 1.0);
  const SlopeFit line = fit_slope(x, y);
  CHECK(line.slope == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));
  CHECK(line.intercept == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(line.r2 == doctest::Approx(1.0));

  const SlopeFit two = fit_slope({1.0, 3.0}, {2.0, 8.0});
  CHECK(two.slope == doctest::Approx(3.0));

  // Normal-equations oracle in long double.
  CounterRng rng(5);
  std::vector<double> cx, cy;
  for (int i = 0; i < 50; ++i) {
    cx.push_back(rng.normal());
    cy.push_back(0.3 * cx.back() + rng.normal());
  }
  long double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < 50; ++i) {
    sx += cx[i];
    sy += cy[i];
    sxx += static_cast<long double>(cx[i]) * cx[i];
    sxy += static_cast<long double>(cx[i]) * cy[i];
  }
  const long double slope = (50 * sxy - sx * sy) / (50 * sxx - sx * sx);
  const long double icept = (sy - slope * sx) / 50;
  const SlopeFit cloud = fit_slope(cx, cy);
  CHECK(std::abs(cloud.slope - static_cast<double>(slope)) <= 1e-12);
  CHECK(std::abs(cloud.intercept - static_cast<double>(icept)) <= 1e-12);

  CHECK_THROWS_AS(fit_slope({2.0, 2.0, 2.0}, {1.0, 2.0, 3.0}), ParameterError);
  CHECK_THROWS_AS(fit_slope({1.0}, {1.0}), ParameterError);
}

TEST_CASE("rate study on a two-point grid flags the interval") {
  StudyConfig c = small_config();
  c.n_grid = {100, 200};
  c.replicates = 20;
  c.rate.bootstrap = 50;
  c.rate.oracle = false;
  c.suites = {false, false, false};
  const RateResult r = rate_study(c);
  CHECK(r.fitted);
  CHECK(r.ci_flagged);
  CHECK(r.log_n.size() == 2);
  CHECK(r.fit.slope == doctest::Approx((r.log_metric[1] - r.log_metric[0]) /
                                       (r.log_n[1] - r.log_n[0])));
  CHECK(r.ci_low <= r.ci_high);

  c.d_values = {2, 3};
  CHECK_THROWS_AS(rate_study(c), ParameterError);
}

TEST_CASE("oracle comparison") {
  StudyConfig c = small_config();
  c.n_grid = {200, 400, 800};
  c.replicates = 20;
  c.rate.pilot_seeds = 2;
  c.rate.pilot_replicates = 10;
  c.suites = {false, false, false};
  const auto pilot = oracle_pilot(c);
  REQUIRE(pilot.size() == 2);
  const StudyReport study = mc_study(c);
  const OracleComparison cmp = oracle_comparison(study, pilot);
  CHECK(cmp.defined);
  CHECK(cmp.ratios.size() == 3);
  CHECK(cmp.ceiling == doctest::Approx(c.rate.pilot_margin * std::max(pilot[0], pilot[1])));
  for (double r : cmp.ratios) CHECK(r > 0.5);
  CHECK(oracle_pilot(c) == pilot);
}

TEST_CASE("parallel_for visits every index once and propagates errors") {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(100, 4, [&](int i) { hits[static_cast<std::size_t>(i)]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](int i) {
                                 if (i == 7) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}

TEST_CASE("instance grid respects its ranges") {
  GridConfig g;
  g.instances = 200;
  g.seed = 3;
  const auto grid = make_instance_grid(g);
  REQUIRE(grid.size() == 200);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Instance& inst = grid[i];
    const int p = inst.truth.p();
    CHECK(p >= g.p_min);
    CHECK(p <= g.p_max);
    CHECK(inst.d >= 1);
    CHECK(inst.d <= p / 2);
    CHECK(inst.r >= 1);
    CHECK(inst.r <= inst.d);
    CHECK(inst.n >= 2 * inst.d);
    CHECK(inst.n <= g.n_max);
  }
  const auto again = make_instance_grid(g);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(again[i].n == grid[i].n);
    CHECK(again[i].truth.f == grid[i].truth.f);
  }
}

TEST_CASE("no eigenvalue halving at n = 200, d = 10") {
  StudyConfig c;
  c.spectrum = SpectrumKind::Polynomial;
  c.alpha = 2.0;
  c.p = 60;
  c.n_grid = {200};
  c.d_values = {10};
  c.replicates = 100;
  c.suites = {false, false, false};
  c.threads = 1;
  const StudyReport r = mc_study(c);
  CHECK(r.totals.halving_replicates == 0);
  CHECK(r.totals.threshold_failures == 0);
}
