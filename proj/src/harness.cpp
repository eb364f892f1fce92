#include "pcrlab/harness.hpp"

#include "pcrlab/errors.hpp"
#include "pcrlab/estimators.hpp"
#include "pcrlab/linalg.hpp"
#include "pcrlab/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>

namespace pcrlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream tags for seeds derived from a master seed.
constexpr std::uint64_t kTruthStream = 0x68;
constexpr std::uint64_t kBootstrapStream = 0xb0075;
constexpr std::uint64_t kPilotStream = 0x9170;

[[noreturn]] void bad(const std::string& what) { throw ParameterError(what); }

// Smallest integer d >= 1 with d^k >= n (up to a relative 1e-12).
int ceil_root(int n, double k) {
  const double target = static_cast<double>(n) * (1.0 - 1e-12);
  int d = std::max(1, static_cast<int>(std::floor(std::pow(n, 1.0 / k))));
  while (std::pow(d, k) < target) ++d;
  while (d > 1 && std::pow(d - 1, k) >= target) --d;
  return d;
}

double mean_of(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(),
                              [](double v) { return std::isnan(v); }),
               values.end());
  if (values.empty()) return kNaN;
  return pairwise_sum(values.data(), values.size()) / static_cast<double>(values.size());
}

Instance resolve_instance(GroundTruth truth, Family family, int n, int d, int r,
                          double c2, BoundConstants constants) {
  const int p = truth.p();
  if (n < 1) bad("sample size n must be positive");
  if (d < 1 || d > p)
    bad("cut dimension d=" + std::to_string(d) + " outside [1, p=" +
        std::to_string(p) + "]");
  if (r < 1 || r > d) bad("cut r=" + std::to_string(r) + " outside [1, d]");
  if (!(c2 >= 1.0)) bad("grouping ratio bound c2 must be >= 1");

  Instance inst{std::move(truth), constants, family, n, d, r, std::nullopt, {}};
  if (d < p) {
    inst.grouping = build_grouping(inst.truth.spectrum, d, c2);
    inst.alignment_blocks.emplace_back(0, d);
    const Grouping& g = *inst.grouping;
    for (int l = 2; l <= g.num_blocks(); ++l) {
      const std::pair<int, int> block{g.breakpoints[l - 1], g.breakpoints[l]};
      if (block != inst.alignment_blocks.front()) inst.alignment_blocks.push_back(block);
    }
  }
  return inst;
}

BoundRegime regime_for(SpectrumKind kind) {
  switch (kind) {
    case SpectrumKind::Exponential: return BoundRegime::Exponential;
    case SpectrumKind::Polynomial: return BoundRegime::Polynomial;
    default: return BoundRegime::General;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

std::string_view to_string(DRule rule) {
  switch (rule) {
    case DRule::Fixed: return "fixed";
    case DRule::Logarithmic: return "log";
    case DRule::Power: return "power";
  }
  return "?";
}

std::string_view to_string(RRule rule) {
  switch (rule) {
    case RRule::Equal: return "equal";
    case RRule::Fixed: return "fixed";
    case RRule::GapSearch: return "gap_search";
  }
  return "?";
}

std::string_view to_string(RateTransform transform) {
  switch (transform) {
    case RateTransform::None: return "none";
    case RateTransform::LogCompensated: return "log_compensated";
  }
  return "?";
}

DRule d_rule_from_string(std::string_view name) {
  if (name == "fixed") return DRule::Fixed;
  if (name == "log") return DRule::Logarithmic;
  if (name == "power") return DRule::Power;
  bad("unknown d rule '" + std::string(name) + "'");
}

RRule r_rule_from_string(std::string_view name) {
  if (name == "equal") return RRule::Equal;
  if (name == "fixed") return RRule::Fixed;
  if (name == "gap_search") return RRule::GapSearch;
  bad("unknown r rule '" + std::string(name) + "'");
}

RateTransform rate_transform_from_string(std::string_view name) {
  if (name == "none") return RateTransform::None;
  if (name == "log_compensated") return RateTransform::LogCompensated;
  bad("unknown rate transform '" + std::string(name) + "'");
}

void StudyConfig::validate() const {
  // Spectrum parameters are validated by the constructor itself.
  (void)make_spectrum(spectrum, alpha, p, c_ev, spectrum_seed);
  if (!(s >= 0.0)) bad("smoothness s must be >= 0");
  if (!(L > 0.0)) bad("source norm L must be > 0");
  if (!(sigma2 >= 0.0)) bad("noise variance sigma2 must be >= 0");
  if (n_grid.empty()) bad("n_grid must not be empty");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 1) bad("n_grid entries must be positive");
    if (i > 0 && n_grid[i] <= n_grid[i - 1]) bad("n_grid must be strictly increasing");
  }
  if (d_rule == DRule::Fixed) {
    if (d_values.empty()) bad("d_values must not be empty for the fixed d rule");
    for (int d : d_values)
      if (d < 1 || d > p)
        bad("d=" + std::to_string(d) + " outside [1, p=" + std::to_string(p) + "]");
  } else if (d_rule == DRule::Logarithmic && spectrum == SpectrumKind::Isotropic) {
    bad("the log d rule needs a decay rate alpha > 0");
  }
  if (r_fixed < 1) bad("r must be >= 1");
  if (!(c1 > 0.0 && c1 < 1.0)) bad("c1 must lie in (0, 1)");
  if (!(c2 >= 1.0)) bad("grouping ratio bound c2 must be >= 1");
  if (replicates < 1) bad("replicates must be >= 1");
  if (threads < 0) bad("threads must be >= 0");
  if (!(tolerances.identity >= 0.0) || !(tolerances.inequality >= 0.0))
    bad("tolerances must be >= 0");
  if (rate.bootstrap < 0) bad("bootstrap resamples must be >= 0");
  if (rate.pilot_seeds < 0 || rate.pilot_replicates < 1)
    bad("pilot needs >= 0 seeds and >= 1 replicate");
  if (!(rate.pilot_margin >= 1.0)) bad("pilot margin must be >= 1");
  for (int n : n_grid) (void)resolve_d(*this, n);
}

std::vector<int> resolve_d(const StudyConfig& config, int n) {
  int d = 0;
  switch (config.d_rule) {
    case DRule::Fixed:
      return config.d_values;
    case DRule::Logarithmic: {
      const double x = std::log(static_cast<double>(n)) / config.alpha;
      d = std::max(1, static_cast<int>(std::ceil(x * (1.0 - 1e-12))));
      break;
    }
    case DRule::Power: {
      const double a = config.alpha;
      d = ceil_root(n, 2.0 * config.s * a + a + 1.0);
      break;
    }
  }
  if (d > config.p)
    bad("d rule gives d=" + std::to_string(d) + " > p=" + std::to_string(config.p) +
        " at n=" + std::to_string(n));
  return {d};
}

std::uint64_t replicate_seed(std::uint64_t master, int n, int index) {
  return derive_seed(master, static_cast<std::uint64_t>(n),
                     static_cast<std::uint64_t>(index));
}

// ---------------------------------------------------------------------------
// Instances and replicates
// ---------------------------------------------------------------------------

GroundTruth make_study_truth(const StudyConfig& config) {
  const Spectrum spectrum = make_spectrum(config.spectrum, config.alpha, config.p,
                                          config.c_ev, config.spectrum_seed);
  return make_ground_truth(spectrum, config.s, config.L, config.sigma2,
                           derive_seed(config.seed, kTruthStream), config.h_mode);
}

Instance make_instance(const StudyConfig& config, const GroundTruth& truth, int n,
                       int d) {
  int r = d;
  switch (config.r_rule) {
    case RRule::Equal: break;
    case RRule::Fixed: r = std::min(config.r_fixed, d); break;
    case RRule::GapSearch:
      if (d < truth.p() && d * config.c1 >= 1.0) {
        if (auto found = find_gap_index_below(truth.spectrum, d, config.c1)) r = found->r;
      }
      break;
  }
  return resolve_instance(truth, config.family, n, d, r, config.c2, config.constants);
}

RiskReport run_instance(const Instance& inst, std::uint64_t seed, const Suites& suites,
                        const Tolerances& tolerances) {
  const GroundTruth& gt = inst.truth;
  const Spectrum& spectrum = gt.spectrum;
  const int p = gt.p();
  const int n = inst.n;
  const int d = inst.d;
  const int r = inst.r;
  const double rel = tolerances.inequality;

  RiskReport rep;
  rep.seed = seed;
  rep.n = n;
  rep.p = p;
  rep.d = d;
  rep.r = r;

  try {
    const DesignSample sample = sample_design(gt, n, inst.family, seed);
    const Eigen::MatrixXd& X = sample.X;
    const PcaDecomposition dec = pca(X);
    rep.lambda_hat_d = dec.lambda_hat(d - 1);
    rep.threshold_event = rep.lambda_hat_d >= spectrum.lambda(d) / 2.0;
    for (int j = 1; j <= d; ++j)
      if (dec.lambda_hat(j - 1) < spectrum.lambda(j) / 2.0) ++rep.halving_count;
    const bool invertible = rep.lambda_hat_d > 0.0;

    const PcrFit pcr = pcr_fit(dec, X, sample.Y, d, spectrum, Thresholding::OracleHalf);
    rep.pcr_thresholded = pcr.thresholded;
    rep.pred_error = prediction_error(pcr.coeffs, gt);
    rep.h_error = h_norm_error(pcr.coeffs, gt);
    if (invertible)
      rep.pred_error_raw = prediction_error(
          pcr_fit(dec, X, sample.Y, d, spectrum, Thresholding::None).coeffs, gt);

    const OracleFit oracle = oracle_fit(X, sample.Y, d, spectrum, Thresholding::OracleHalf);
    rep.oracle_thresholded = oracle.thresholded;
    rep.oracle_pred_error = prediction_error(oracle.coeffs, gt);
    rep.oracle_h_error = h_norm_error(oracle.coeffs, gt);
    try {
      rep.oracle_pred_error_raw = prediction_error(
          oracle_fit(X, sample.Y, d, spectrum, Thresholding::None).coeffs, gt);
    } catch (const DegenerateFitError&) {
    }

    BiasVariance bv{kNaN, kNaN};
    if (invertible) {
      bv = bias_variance(dec, gt, d, n);
      rep.bias = bv.bias;
      rep.variance = bv.variance;
    }
    const ExcessRisk er = excess_risk(dec, spectrum, d);
    rep.excess_risk = er.excess;
    rep.recon_empirical = er.recon_empirical;
    rep.recon_population = er.recon_population;
    const double next = spectrum.lambda(std::min(d + 1, p));
    if (d < p) {
      const ExcessSplit split = excess_risk_split(dec, spectrum, d, next);
      rep.split_le = split.le;
      rep.split_gt = split.gt;
    }
    rep.events.push_back({"any_halving", rep.halving_count > 0});

    if (suites.identities && invertible) {
      auto add = [&](std::string name, double lhs, double rhs,
                     std::initializer_list<double> terms) {
        rep.identities.push_back(
            {std::move(name), lhs, rhs, identity_residual(lhs, rhs, terms)});
      };
      const double direct = conditional_mse_direct(dec, X, gt, d, n);
      add("bias_variance", bv.bias + bv.variance, direct, {bv.bias, bv.variance});
      add("bias_identity", bv.bias, bias_identity_rhs(dec, gt, d), {});
      const double mus[] = {0.0, next, spectrum.lambda(1), -1.0};
      const char* mu_names[] = {"split_mu_zero", "split_mu_next", "split_mu_top",
                                "split_mu_minus_one"};
      for (int i = 0; i < 4; ++i) {
        const ExcessSplit split = excess_risk_split(dec, spectrum, d, mus[i]);
        add(mu_names[i], split.le + split.gt, er.excess,
            {split.le, split.gt, er.leading_lost, er.trailing_gained});
      }
      add("trace_route", er.excess, er.via_reconstruction,
          {er.recon_empirical, er.recon_population, er.leading_lost,
           er.trailing_gained});

      double inv_sum = 0.0;
      for (int j = 0; j < d; ++j) inv_sum += 1.0 / dec.lambda_hat(j);
      Eigen::VectorXd tail = Eigen::VectorXd::Zero(p);
      if (d < p) {
        const auto U = dec.U_hat.rightCols(p - d);
        tail = U * (U.transpose() * gt.f);
      }
      const double h_bias = tail.squaredNorm();
      const double h_var = gt.sigma2 / n * inv_sum;
      add("h_norm_split", h_bias + h_var, conditional_h_error_direct(dec, X, gt, d, n),
          {h_bias, h_var});
    }

    if (suites.inequalities && d < p) {
      auto& out = rep.inequalities;
      out.push_back(make_check("excess_nonnegative", -er.excess, 1e-12, true, 0.0));

      const BiasBounds bb = bias_bounds(dec, gt, d, r);
      for (auto& c : bb.checks(rel)) out.push_back(std::move(c));
      const SourceBiasChain chain = source_bias_chain(dec, gt, d, r);
      for (auto& c : chain.checks(rel)) out.push_back(std::move(c));

      const Grouping& grouping = *inst.grouping;
      const VarianceBound vb = variance_bound(dec, gt, grouping, d, n);
      out.push_back(make_check("variance_grouped", vb.lhs, vb.rhs, vb.event, rel));

      const Remainders rem = final_remainders(dec, gt, grouping, d, r);
      const double noise = gt.sigma2 / n;
      const double cmse = bv.bias + bv.variance;
      const double h2 = gt.h.squaredNorm();
      const double lam1 = spectrum.lambda(1);
      const double lam_next_r = spectrum.lambda(r + 1);
      const double c_bias = std::max(std::pow(lam1, 2.0 * gt.s) + 4.0 * chain.eigen_constant, 6.0);
      const double c_var = std::max({2.0 * grouping.overshoot * grouping.ratio_bound, 2.0,
                                     2.0 * lam1});
      const double c_final = std::max(c_bias, c_var);
      const double leading = std::pow(lam_next_r, 1.0 + 2.0 * gt.s) * h2;
      out.push_back(make_check("composed_excess_form", cmse,
                               bb.excess_form + noise * vb.rhs, vb.event, rel));
      out.push_back(make_check("composed_source", cmse,
                               chain.total_rhs + noise * vb.rhs, vb.event, rel));
      out.push_back(make_check(
          "final_bound", cmse, c_final * (leading + rem.r1 + noise * (d + rem.r2)),
          vb.event, rel));

      const HNormBounds hb = h_norm_bounds(dec, X, gt, d, r, n);
      out.push_back(make_check("h_norm_bound", hb.lhs, hb.rhs, hb.event, rel));

      rep.terms.push_back({"R1", rem.r1});
      rep.terms.push_back({"R2", rem.r2});
      rep.terms.push_back({"final_constant", c_final});
      rep.terms.push_back({"eigen_constant", chain.eigen_constant});
      rep.terms.push_back({"grouping_overshoot", grouping.overshoot});
      rep.terms.push_back({"grouping_ratio_bound", grouping.ratio_bound});
      rep.terms.push_back({"grouped_remainder", vb.grouped});
      rep.terms.push_back({"h_norm_r2", hb.r2});
      rep.terms.push_back(
          {"excess_bound_rhs", excess_risk_bound_rhs(spectrum, d, n,
                                                     regime_for(spectrum.kind()),
                                                     inst.constants)});
    }

    if (suites.alignment) {
      for (const auto& [lo, hi] : inst.alignment_blocks) {
        const AlignmentCheck ac = projector_alignment(dec, X, spectrum, lo, hi, n);
        const std::string name =
            "alignment_r" + std::to_string(lo) + "_s" + std::to_string(hi);
        rep.inequalities.push_back(
            make_check(name, ac.lhs, ac.rhs, ac.defined && ac.event, rel));
        rep.events.push_back({name, ac.defined && ac.event});
      }
    }
  } catch (const std::exception& e) {
    rep.degenerate = true;
    rep.error = e.what();
  }
  return rep;
}

RiskReport run_replicate(const StudyConfig& config, int n, int replicate_index, int d) {
  const Instance inst = make_instance(config, make_study_truth(config), n, d);
  RiskReport rep = run_instance(inst, replicate_seed(config.seed, n, replicate_index),
                                config.suites, config.tolerances);
  rep.replicate = replicate_index;
  return rep;
}

RiskReport run_replicate(const StudyConfig& config, int n, int replicate_index) {
  return run_replicate(config, n, replicate_index, resolve_d(config, n).front());
}

void GridConfig::validate() const {
  if (instances < 0 || replicates < 1) bad("grid needs instances >= 0 and replicates >= 1");
  if (p_min < 2 || p_max < p_min) bad("grid needs 2 <= p_min <= p_max");
  if (n_max < 2 * (p_max / 2)) bad("grid n_max must be >= 2 * floor(p_max / 2)");
  if (families.empty() || spectra.empty() || smoothness.empty() || c2_values.empty())
    bad("grid lists must not be empty");
  for (double s : smoothness)
    if (!(s >= 0.0)) bad("grid smoothness values must be >= 0");
  for (double c2 : c2_values)
    if (!(c2 >= 1.0)) bad("grouping ratio bound c2 must be >= 1");
  if (!(sigma2_min >= 0.0) || sigma2_max < sigma2_min) bad("grid sigma2 range is invalid");
}

std::vector<Instance> make_instance_grid(const GridConfig& grid) {
  grid.validate();
  std::vector<Instance> out;
  out.reserve(static_cast<std::size_t>(grid.instances));
  const auto pick = [](CounterRng& rng, int lo, int hi) {  // uniform on [lo, hi]
    return lo + static_cast<int>(rng.uniform() * (hi - lo + 1));
  };
  const HMode modes[] = {HMode::RandomSphere, HMode::FirstCoordinate, HMode::Flat};
  const int nf = static_cast<int>(grid.families.size());
  const int ns = static_cast<int>(grid.spectra.size());
  for (int i = 0; i < grid.instances; ++i) {
    const auto key = static_cast<std::uint64_t>(i);
    CounterRng rng(derive_seed(grid.seed, key));
    const Family family = grid.families[static_cast<std::size_t>(i % nf)];
    const SpectrumKind kind = grid.spectra[static_cast<std::size_t>((i / nf) % ns)];

    const int p = pick(rng, grid.p_min, grid.p_max);
    const int d = pick(rng, 1, std::max(1, p / 2));
    const int r = pick(rng, 1, d);
    const int n = pick(rng, 2 * d, grid.n_max);
    const double s = grid.smoothness[static_cast<std::size_t>(
        pick(rng, 0, static_cast<int>(grid.smoothness.size()) - 1))];
    const HMode mode = modes[pick(rng, 0, 2)];
    const double sigma2 = grid.sigma2_min + (grid.sigma2_max - grid.sigma2_min) * rng.uniform();
    const double c2 = grid.c2_values[static_cast<std::size_t>(
        pick(rng, 0, static_cast<int>(grid.c2_values.size()) - 1))];

    double alpha = 0.0;
    double c_ev = 1.0;
    switch (kind) {
      case SpectrumKind::Exponential: alpha = grid.exponential_alpha; break;
      case SpectrumKind::Polynomial: alpha = grid.polynomial_alpha; break;
      case SpectrumKind::ApproxPolynomial:
        alpha = grid.polynomial_alpha;
        c_ev = grid.c_ev;
        break;
      case SpectrumKind::Isotropic: break;
    }
    const Spectrum spectrum = make_spectrum(kind, alpha, p, c_ev, derive_seed(grid.seed, key, 7));
    GroundTruth truth = make_ground_truth(spectrum, s, 1.0, sigma2,
                                          derive_seed(grid.seed, key, kTruthStream), mode);
    out.push_back(resolve_instance(std::move(truth), family, n, d, r, c2, {}));
  }
  return out;
}

void parallel_for(int count, int threads, const std::function<void(int)>& task) {
  if (count <= 0) return;
  int workers = threads > 0 ? threads
                            : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

std::vector<Aggregate> aggregate_columns(const std::vector<RiskReport>& reports) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> values;
  for (const auto& rep : reports) {
    for (auto& [name, value] : rep.flatten()) {
      auto it = values.find(name);
      if (it == values.end()) {
        order.push_back(name);
        it = values.emplace(name, std::vector<double>{}).first;
      }
      if (!std::isnan(value)) it->second.push_back(value);
    }
  }
  std::vector<Aggregate> out;
  out.reserve(order.size());
  for (const auto& name : order) {
    const auto& v = values[name];
    Aggregate a;
    a.name = name;
    a.count = static_cast<int>(v.size());
    if (v.empty()) {
      a.mean = a.se = kNaN;
    } else {
      a.mean = pairwise_sum(v.data(), v.size()) / static_cast<double>(v.size());
      if (v.size() < 2) {
        a.se = kNaN;
      } else {
        std::vector<double> sq(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - a.mean) * (v[i] - a.mean);
        const double var = pairwise_sum(sq.data(), sq.size()) / static_cast<double>(v.size() - 1);
        a.se = std::sqrt(var / static_cast<double>(v.size()));
      }
    }
    out.push_back(std::move(a));
  }
  return out;
}

SuiteSummary summarize(const std::vector<RiskReport>& reports, const Tolerances& tolerances) {
  SuiteSummary s;
  std::map<std::string, std::size_t> index;
  for (const auto& rep : reports) {
    ++s.reports;
    if (rep.degenerate) ++s.degenerate;
    for (const auto& id : rep.identities) {
      ++s.identity_checks;
      if (std::isnan(id.residual))
        s.max_identity_residual = kNaN;
      else if (id.residual > s.max_identity_residual)
        s.max_identity_residual = id.residual;
    }
    s.identity_failures += rep.identity_failures(tolerances.identity);
    s.violations += rep.violation_count();
    for (const auto& c : rep.inequalities) {
      auto it = index.find(c.name);
      if (it == index.end()) {
        it = index.emplace(c.name, s.checks.size()).first;
        s.checks.push_back({c.name, 0, 0});
      }
      CheckTally& t = s.checks[it->second];
      if (c.evaluated) {
        ++t.evaluated;
        if (!c.holds) ++t.violations;
      }
    }
    if (!rep.degenerate) {
      if (rep.halving_count > 0) ++s.halving_replicates;
      if (!rep.threshold_event) ++s.threshold_failures;
    }
  }
  return s;
}

namespace {

void merge_into(SuiteSummary& total, const SuiteSummary& part) {
  total.reports += part.reports;
  total.degenerate += part.degenerate;
  if (std::isnan(part.max_identity_residual) ||
      part.max_identity_residual > total.max_identity_residual)
    total.max_identity_residual = part.max_identity_residual;
  total.identity_failures += part.identity_failures;
  total.identity_checks += part.identity_checks;
  total.violations += part.violations;
  total.halving_replicates += part.halving_replicates;
  total.threshold_failures += part.threshold_failures;
  for (const auto& c : part.checks) {
    auto it = std::find_if(total.checks.begin(), total.checks.end(),
                           [&](const CheckTally& t) { return t.name == c.name; });
    if (it == total.checks.end()) {
      total.checks.push_back(c);
    } else {
      it->evaluated += c.evaluated;
      it->violations += c.violations;
    }
  }
}

}  // namespace

const Aggregate* StudyPoint::stat(std::string_view name) const {
  for (const auto& a : stats)
    if (a.name == name) return &a;
  return nullptr;
}

SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) bad("fit_slope needs equally many abscissae and ordinates");
  const std::set<double> distinct(x.begin(), x.end());
  if (distinct.size() < 2) bad("fit_slope needs at least two distinct abscissae");
  const double m = static_cast<double>(x.size());
  const double mx = pairwise_sum(x.data(), x.size()) / m;
  const double my = pairwise_sum(y.data(), y.size()) / m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - fit.intercept - fit.slope * x[i];
    ssr += e * e;
  }
  fit.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  return fit;
}

StudyReport mc_study(const StudyConfig& config) {
  config.validate();
  StudyReport report;
  report.config = config;
  const GroundTruth truth = make_study_truth(config);
  for (int n : config.n_grid) {
    for (int d : resolve_d(config, n)) {
      const Instance inst = make_instance(config, truth, n, d);
      StudyPoint point;
      point.n = n;
      point.d = d;
      point.r = inst.r;
      point.reports.resize(static_cast<std::size_t>(config.replicates));
      parallel_for(config.replicates, config.threads, [&](int i) {
        RiskReport rep = run_instance(inst, replicate_seed(config.seed, n, i),
                                      config.suites, config.tolerances);
        rep.replicate = i;
        point.reports[static_cast<std::size_t>(i)] = std::move(rep);
      });
      point.stats = aggregate_columns(point.reports);
      point.summary = summarize(point.reports, config.tolerances);
      merge_into(report.totals, point.summary);
      report.points.push_back(std::move(point));
    }
  }
  return report;
}

namespace {

double transform_metric(double mean, int n, RateTransform transform) {
  const double nn = static_cast<double>(n);
  return transform == RateTransform::LogCompensated ? mean * nn / std::log(nn) : mean;
}

std::vector<double> metric_values(const StudyPoint& point) {
  std::vector<double> v;
  v.reserve(point.reports.size());
  for (const auto& rep : point.reports) v.push_back(rep.pred_error);
  return v;
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

RateResult rate_from_study(const StudyReport& study) {
  const StudyConfig& config = study.config;
  RateResult out;
  out.study = study;
  out.ci_low = out.ci_high = kNaN;
  std::vector<std::vector<double>> samples;
  for (const auto& point : study.points) {
    samples.push_back(metric_values(point));
    const double mean = transform_metric(mean_of(samples.back()), point.n, config.rate.transform);
    out.log_n.push_back(std::log(static_cast<double>(point.n)));
    out.log_metric.push_back(mean > 0.0 ? std::log(mean) : kNaN);
  }
  out.ci_flagged = study.points.size() < 4;
  out.fitted = study.points.size() >= 2 &&
               std::none_of(out.log_metric.begin(), out.log_metric.end(),
                            [](double v) { return std::isnan(v); });
  if (!out.fitted) return out;
  out.fit = fit_slope(out.log_n, out.log_metric);

  const int resamples = config.rate.bootstrap;
  if (resamples == 0) return out;
  std::vector<double> slopes(static_cast<std::size_t>(resamples));
  for (int b = 0; b < resamples; ++b) {
    CounterRng rng(derive_seed(config.seed, kBootstrapStream, static_cast<std::uint64_t>(b)));
    std::vector<double> y;
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const auto& v = samples[k];
      std::vector<double> draw(v.size());
      for (auto& x : draw)
        x = v[std::min(v.size() - 1, static_cast<std::size_t>(rng.uniform() * v.size()))];
      const double mean = transform_metric(mean_of(std::move(draw)), study.points[k].n,
                                           config.rate.transform);
      y.push_back(mean > 0.0 ? std::log(mean) : kNaN);
    }
    slopes[static_cast<std::size_t>(b)] =
        std::any_of(y.begin(), y.end(), [](double v) { return std::isnan(v); })
            ? kNaN
            : fit_slope(out.log_n, y).slope;
  }
  slopes.erase(std::remove_if(slopes.begin(), slopes.end(),
                              [](double v) { return std::isnan(v); }),
               slopes.end());
  out.ci_low = percentile(slopes, 0.025);
  out.ci_high = percentile(slopes, 0.975);
  return out;
}

RateResult rate_study(const StudyConfig& config) {
  if (config.d_rule == DRule::Fixed && config.d_values.size() != 1)
    bad("a rate study needs exactly one d per n");
  return rate_from_study(mc_study(config));
}

namespace {

double ratio_at(const StudyPoint& point) {
  std::vector<double> pcr, oracle;
  for (const auto& rep : point.reports) {
    pcr.push_back(rep.pred_error);
    oracle.push_back(rep.oracle_pred_error);
  }
  const double den = mean_of(oracle);
  return den > 0.0 ? mean_of(pcr) / den : kNaN;
}

}  // namespace

std::vector<double> oracle_pilot(const StudyConfig& config) {
  std::vector<double> ratios;
  for (int i = 0; i < config.rate.pilot_seeds; ++i) {
    StudyConfig pilot = config;
    pilot.seed = derive_seed(config.seed, kPilotStream, static_cast<std::uint64_t>(i));
    pilot.replicates = config.rate.pilot_replicates;
    pilot.n_grid = {config.n_grid.back()};
    pilot.suites = {false, false, false};
    const StudyReport study = mc_study(pilot);
    ratios.push_back(ratio_at(study.points.back()));
  }
  return ratios;
}

OracleComparison oracle_comparison(const StudyReport& study,
                                   const std::vector<double>& pilot_ratios) {
  OracleComparison out;
  out.pilot_ratios = pilot_ratios;
  std::vector<double> log_n, log_ratio;
  for (const auto& point : study.points) {
    const double ratio = ratio_at(point);
    out.ratios.push_back(ratio);
    log_n.push_back(std::log(static_cast<double>(point.n)));
    log_ratio.push_back(ratio > 0.0 ? std::log(ratio) : kNaN);
  }
  out.defined = study.points.size() >= 2 &&
                std::none_of(log_ratio.begin(), log_ratio.end(),
                             [](double v) { return std::isnan(v); });
  if (out.defined) out.fit = fit_slope(log_n, log_ratio);

  out.ceiling = kNaN;
  if (!pilot_ratios.empty() &&
      std::none_of(pilot_ratios.begin(), pilot_ratios.end(),
                   [](double v) { return std::isnan(v); })) {
    out.ceiling = study.config.rate.pilot_margin *
                  *std::max_element(pilot_ratios.begin(), pilot_ratios.end());
  }
  out.below_ceiling = !out.ratios.empty() && out.ratios.back() <= out.ceiling;
  return out;
}

}  // namespace pcrlab
