#pragma once

#include "pcrlab/datagen.hpp"
#include "pcrlab/report.hpp"
#include "pcrlab/risk.hpp"
#include "pcrlab/spectrum.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pcrlab {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class DRule {
  Fixed,        // every value in d_values
  Logarithmic,  // ceil(log(n) / alpha)
  Power,        // ceil(n^{1 / (2 s alpha + alpha + 1)})
};

enum class RRule {
  Equal,      // r = d
  Fixed,      // r = min(r_fixed, d)
  GapSearch,  // find_gap_index_below(spectrum, d, c1), falling back to d
};

/// Transformation of the mean risk before the log-log fit.
enum class RateTransform {
  None,            // log(mean risk)
  LogCompensated,  // log(mean risk * n / log n)
};

std::string_view to_string(DRule rule);
std::string_view to_string(RRule rule);
std::string_view to_string(RateTransform transform);
DRule d_rule_from_string(std::string_view name);
RRule r_rule_from_string(std::string_view name);
RateTransform rate_transform_from_string(std::string_view name);

struct Suites {
  bool identities = true;
  bool inequalities = true;
  bool alignment = true;
};

struct Tolerances {
  double identity = 1e-10;    // relative residual
  double inequality = 1e-12;  // relative slack on lhs <= rhs
};

struct RateOptions {
  RateTransform transform = RateTransform::None;
  int bootstrap = 500;
  bool oracle = true;
  int pilot_seeds = 3;
  int pilot_replicates = 100;
  double pilot_margin = 1.25;
  std::optional<double> target_slope;
  double slope_tolerance = 0.1;
  std::optional<double> ratio_slope_tolerance;
};

struct StudyConfig {
  SpectrumKind spectrum = SpectrumKind::Polynomial;
  double alpha = 2.0;
  int p = 50;
  double c_ev = 1.0;
  std::uint64_t spectrum_seed = 0;

  double s = 0.0;
  double L = 1.0;
  double sigma2 = 1.0;
  HMode h_mode = HMode::RandomSphere;
  Family family = Family::Gaussian;

  std::vector<int> n_grid{200};
  DRule d_rule = DRule::Fixed;
  std::vector<int> d_values{5};
  RRule r_rule = RRule::Equal;
  int r_fixed = 1;
  double c1 = 0.5;
  double c2 = 2.0;

  int replicates = 100;
  std::uint64_t seed = 1;
  int threads = 0;

  Suites suites;
  Tolerances tolerances;
  BoundConstants constants;
  RateOptions rate;

  /// Throws ParameterError describing the first invalid field.
  void validate() const;
};

/// Cut dimensions for sample size n under the configured rule.
std::vector<int> resolve_d(const StudyConfig& config, int n);

/// Seed of replicate `index` at sample size n.
std::uint64_t replicate_seed(std::uint64_t master, int n, int index);

// ---------------------------------------------------------------------------
// Instances and replicates
// ---------------------------------------------------------------------------

/// A fully resolved problem: everything except the design draw.
struct Instance {
  GroundTruth truth;
  BoundConstants constants;
  Family family = Family::Gaussian;
  int n = 0;
  int d = 0;
  int r = 0;
  std::optional<Grouping> grouping;  // absent when d = p
  /// Blocks J = {r+1..s} for the projector-alignment inequality.
  std::vector<std::pair<int, int>> alignment_blocks;
};

/// Ground truth shared by every replicate of a study.
GroundTruth make_study_truth(const StudyConfig& config);

Instance make_instance(const StudyConfig& config, const GroundTruth& truth,
                       int n, int d);

/// Draws one design and evaluates every enabled suite. Degenerate fits are
/// recorded in the report, never thrown.
RiskReport run_instance(const Instance& instance, std::uint64_t seed,
                        const Suites& suites, const Tolerances& tolerances);

/// Deterministic in (config.seed, n, replicate_index).
RiskReport run_replicate(const StudyConfig& config, int n, int replicate_index,
                         int d);
RiskReport run_replicate(const StudyConfig& config, int n, int replicate_index);

/// Parameters of a randomly generated instance grid.
struct GridConfig {
  int instances = 100;
  int replicates = 1;
  std::uint64_t seed = 1;
  int p_min = 4;
  int p_max = 50;
  int n_max = 200;
  double exponential_alpha = 1.0;
  double polynomial_alpha = 2.0;
  double c_ev = 1.5;
  std::vector<Family> families{Family::Gaussian, Family::Rademacher, Family::Uniform};
  std::vector<SpectrumKind> spectra{SpectrumKind::Exponential, SpectrumKind::Polynomial,
                                    SpectrumKind::ApproxPolynomial,
                                    SpectrumKind::Isotropic};
  std::vector<double> smoothness{0.0, 0.5, 1.0, 2.0};
  std::vector<double> c2_values{1.0, 2.0, 4.0};
  double sigma2_min = 0.1;
  double sigma2_max = 2.0;

  void validate() const;
};

/// Cycles through families x spectra; p, n, d, r, s, h and sigma^2 are drawn
/// from the grid seed with 2d <= n <= n_max and d <= p / 2.
std::vector<Instance> make_instance_grid(const GridConfig& grid);

/// Runs `task(i)` for i in [0, count) on up to `threads` workers
/// (0 = hardware concurrency). Each index is processed exactly once.
void parallel_for(int count, int threads, const std::function<void(int)>& task);

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct Aggregate {
  std::string name;
  int count = 0;    // finite values
  double mean = 0.0;
  double se = 0.0;  // sample sd / sqrt(count); NaN when count < 2
};

/// Mean and standard error of each column across reports, columns in
/// first-seen order, NaN entries skipped. Summation is pairwise in report
/// order so the result does not depend on how reports were produced.
std::vector<Aggregate> aggregate_columns(const std::vector<RiskReport>& reports);

struct CheckTally {
  std::string name;
  int evaluated = 0;
  int violations = 0;
};

struct SuiteSummary {
  int reports = 0;
  int degenerate = 0;
  double max_identity_residual = 0.0;
  int identity_failures = 0;
  int identity_checks = 0;
  int violations = 0;
  std::vector<CheckTally> checks;  // first-seen order
  int halving_replicates = 0;      // replicates with some lambda_hat_j < lambda_j / 2
  int threshold_failures = 0;      // replicates with lambda_hat_d < lambda_d / 2
};

SuiteSummary summarize(const std::vector<RiskReport>& reports,
                       const Tolerances& tolerances);

struct StudyPoint {
  int n = 0;
  int d = 0;
  int r = 0;
  std::vector<RiskReport> reports;
  std::vector<Aggregate> stats;
  SuiteSummary summary;

  const Aggregate* stat(std::string_view name) const;
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares of y on x. Throws ParameterError if fewer than two
/// distinct abscissae are given.
SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y);

struct StudyReport {
  StudyConfig config;
  std::vector<StudyPoint> points;
  SuiteSummary totals;
};

/// R replicates at every (n, d) point of the configuration.
StudyReport mc_study(const StudyConfig& config);

struct RateResult {
  StudyReport study;
  std::vector<double> log_n;
  std::vector<double> log_metric;
  bool fitted = false;  // false when some mean risk is <= 0
  SlopeFit fit;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool ci_flagged = false;  // fewer than four grid points
};

/// Applies the d-rule per n, runs the study and fits the log-log slope of
/// the transformed mean thresholded-PCR prediction error. The bootstrap
/// interval resamples replicates within each n.
RateResult rate_study(const StudyConfig& config);
RateResult rate_from_study(const StudyReport& study);

struct OracleComparison {
  std::vector<double> ratios;  // mean PCR risk / mean oracle risk per n
  bool defined = false;        // false when some oracle mean risk is <= 0
  SlopeFit fit;
  std::vector<double> pilot_ratios;  // ratio at the largest n, one per pilot seed
  double ceiling = 0.0;              // pilot_margin * max(pilot_ratios)
  bool below_ceiling = false;
};

/// Ratio at the largest n for each pilot seed. Pilot seeds are derived from
/// config.seed, use config.rate.pilot_replicates replicates and are
/// independent of the main study, so the pilot can run before it.
std::vector<double> oracle_pilot(const StudyConfig& config);

/// Ratio curve from a finished study, judged against the pilot ceiling.
OracleComparison oracle_comparison(const StudyReport& study,
                                   const std::vector<double>& pilot_ratios);

}  // namespace pcrlab
