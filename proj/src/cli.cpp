#include "pcrlab/cli.hpp"

#include "pcrlab/errors.hpp"
#include "pcrlab/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#ifndef PCRLAB_VERSION
#define PCRLAB_VERSION "0.0.0"
#endif

namespace pcrlab::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Config reading
// ---------------------------------------------------------------------------

void allow_keys(const json& j, std::initializer_list<std::string_view> keys,
                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& item : j.items()) {
    if (std::find(keys.begin(), keys.end(), item.key()) == keys.end())
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("key '") + key + "' has the wrong type");
  }
}

template <typename T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError("missing key '" + std::string(key) + "' in " + where);
  return get_or<T>(j, key, T{});
}

std::uint64_t get_seed(const json& j, const char* key, std::uint64_t fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0))
    throw ConfigError(std::string("key '") + key + "' must be a non-negative integer");
  return it->get<std::uint64_t>();
}

struct SpectrumSpec {
  SpectrumKind kind = SpectrumKind::Polynomial;
  double alpha = 2.0;
  int p = 50;
  double c_ev = 1.0;
  std::uint64_t seed = 0;
};

SpectrumSpec read_spectrum(const json& j) {
  allow_keys(j, {"kind", "alpha", "p", "c_ev", "seed"}, "spectrum");
  SpectrumSpec s;
  s.kind = spectrum_kind_from_string(require<std::string>(j, "kind", "spectrum"));
  s.alpha = get_or(j, "alpha", s.kind == SpectrumKind::Exponential ? 1.0 : 2.0);
  s.p = require<int>(j, "p", "spectrum");
  s.c_ev = get_or(j, "c_ev", 1.0);
  s.seed = get_seed(j, "seed", 0);
  return s;
}

std::vector<Family> read_families(const json& j) {
  std::vector<Family> out;
  for (const auto& v : j) out.push_back(family_from_string(v.get<std::string>()));
  return out;
}

std::vector<SpectrumKind> read_kinds(const json& j) {
  std::vector<SpectrumKind> out;
  for (const auto& v : j) out.push_back(spectrum_kind_from_string(v.get<std::string>()));
  return out;
}

ojson spectrum_json(const Spectrum& s) {
  ojson j;
  j["kind"] = std::string(to_string(s.kind()));
  j["alpha"] = s.alpha();
  j["c_ev"] = s.c_ev();
  j["seed"] = s.seed();
  j["p"] = s.p();
  return j;
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ojson number(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

struct LabeledReport {
  std::vector<std::string> labels;  // values for the label columns
  const RiskReport* report;
};

std::string reports_csv(const std::vector<std::string>& label_names,
                        const std::vector<LabeledReport>& rows) {
  std::vector<std::string> order;
  std::map<std::string, bool> seen;
  std::vector<std::vector<Column>> flat;
  flat.reserve(rows.size());
  for (const auto& row : rows) {
    flat.push_back(row.report->flatten());
    for (const auto& [name, value] : flat.back()) {
      if (!seen[name]) {
        seen[name] = true;
        order.push_back(name);
      }
    }
  }
  std::ostringstream out;
  for (const auto& name : label_names) out << name << ',';
  out << "seed";
  for (const auto& name : order) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::map<std::string, double> lookup(flat[i].begin(), flat[i].end());
    for (const auto& label : rows[i].labels) out << label << ',';
    out << rows[i].report->seed;
    for (const auto& name : order) {
      const auto it = lookup.find(name);
      out << ',' << format_number(it == lookup.end() ? kNaN : it->second);
    }
    out << '\n';
  }
  return out.str();
}

ojson suite_json(const SuiteSummary& s) {
  ojson j;
  j["reports"] = s.reports;
  j["degenerate"] = s.degenerate;
  j["identity_checks"] = s.identity_checks;
  j["identity_failures"] = s.identity_failures;
  j["max_identity_residual"] = number(s.max_identity_residual);
  j["violations"] = s.violations;
  j["halving_replicates"] = s.halving_replicates;
  j["threshold_failures"] = s.threshold_failures;
  ojson checks = ojson::object();
  for (const auto& c : s.checks)
    checks[c.name] = {{"evaluated", c.evaluated}, {"violations", c.violations}};
  j["checks"] = std::move(checks);
  return j;
}

ojson point_json(const StudyPoint& point) {
  ojson j;
  j["n"] = point.n;
  j["d"] = point.d;
  j["r"] = point.r;
  j["replicates"] = static_cast<int>(point.reports.size());
  const bool se_defined = point.reports.size() >= 2;
  j["se_defined"] = se_defined;
  ojson stats = ojson::object();
  for (const auto& a : point.stats) {
    stats[a.name] = {{"mean", number(a.mean)}, {"se", number(a.se)}, {"count", a.count}};
  }
  j["stats"] = std::move(stats);
  j["summary"] = suite_json(point.summary);
  return j;
}

struct Assertions {
  ojson list = ojson::array();
  bool all_passed = true;

  void add(const std::string& name, bool passed, ojson detail = ojson::object()) {
    detail["name"] = name;
    detail["passed"] = passed;
    list.push_back(std::move(detail));
    all_passed = all_passed && passed;
  }
};

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunContext {
  const Options& options;
  std::ostream& log;
  json config;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string started;
  std::vector<std::string> outputs;
  ojson manifest_extra = ojson::object();

  fs::path emit(const std::string& name, const std::string& content) {
    const fs::path path = options.out / name;
    write_file(path, content);
    outputs.push_back(path.string());
    return path;
  }

  void finish(const Assertions& assertions, ojson summary) {
    summary["passed"] = assertions.all_passed;
    summary["assertions"] = assertions.list;
    emit(options.command + "_summary.json", summary.dump(2) + "\n");

    ojson manifest;
    manifest["command"] = options.command;
    manifest["version"] = version();
    manifest["config_path"] = options.config.string();
    manifest["config"] = ojson::parse(config.dump());
    manifest["seed"] = seed;
    manifest["threads"] = threads;
    manifest["started_at"] = started;
    manifest["finished_at"] = timestamp();
    manifest["outputs"] = outputs;
    for (const auto& item : manifest_extra.items()) manifest[item.key()] = item.value();
    manifest["exit_code"] = assertions.all_passed ? kPass : kFail;
    write_file(options.out / (options.command + "_manifest.json"), manifest.dump(2) + "\n");
  }
};

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct SuiteRun {
  std::vector<RiskReport> grid_reports;
  std::vector<StudyReport> studies;
  SuiteSummary totals;
};

void merge(SuiteSummary& total, const SuiteSummary& part) {
  total.reports += part.reports;
  total.degenerate += part.degenerate;
  if (std::isnan(part.max_identity_residual) ||
      part.max_identity_residual > total.max_identity_residual)
    total.max_identity_residual = part.max_identity_residual;
  total.identity_checks += part.identity_checks;
  total.identity_failures += part.identity_failures;
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

// Shared driver of the identity and inequality commands: a random grid plus
// optional explicit studies, each run with the given suites.
int run_suite_command(RunContext& ctx, const Suites& suites, bool identity_mode) {
  const json& cfg = ctx.config;
  allow_keys(cfg, {"seed", "threads", "grid", "studies", "tolerances"}, "config");
  Tolerances tol;
  if (cfg.contains("tolerances")) {
    allow_keys(cfg["tolerances"], {"identity", "inequality"}, "tolerances");
    tol.identity = get_or(cfg["tolerances"], "identity", tol.identity);
    tol.inequality = get_or(cfg["tolerances"], "inequality", tol.inequality);
    if (!(tol.identity >= 0.0) || !(tol.inequality >= 0.0))
      throw ConfigError("tolerances must be >= 0");
  }

  GridConfig grid;
  grid.instances = 0;
  if (cfg.contains("grid")) grid = grid_config_from_json(cfg["grid"]);
  grid.seed = ctx.seed;
  const std::vector<Instance> instances = make_instance_grid(grid);

  std::vector<StudyConfig> study_configs;
  if (cfg.contains("studies")) {
    if (!cfg["studies"].is_array()) throw ConfigError("studies must be an array");
    std::uint64_t index = 0;
    for (const auto& item : cfg["studies"]) {
      StudyConfig sc = study_config_from_json(item);
      if (!item.contains("seed")) sc.seed = derive_seed(ctx.seed, 0x57d1, index);
      sc.suites = suites;
      sc.tolerances = tol;
      sc.threads = ctx.threads;
      sc.validate();
      study_configs.push_back(std::move(sc));
      ++index;
    }
  }
  if (instances.empty() && study_configs.empty())
    throw ConfigError("nothing to run: configure a grid or studies");

  SuiteRun run;
  const int per = grid.replicates;
  run.grid_reports.resize(instances.size() * static_cast<std::size_t>(per));
  parallel_for(static_cast<int>(run.grid_reports.size()), ctx.threads, [&](int k) {
    const int i = k / per;
    const int rep = k % per;
    const Instance& inst = instances[static_cast<std::size_t>(i)];
    const std::uint64_t seed = replicate_seed(
        derive_seed(grid.seed, static_cast<std::uint64_t>(i)), inst.n, rep);
    RiskReport r = run_instance(inst, seed, suites, tol);
    r.replicate = rep;
    run.grid_reports[static_cast<std::size_t>(k)] = std::move(r);
  });
  merge(run.totals, summarize(run.grid_reports, tol));
  for (const auto& sc : study_configs) {
    run.studies.push_back(mc_study(sc));
    merge(run.totals, run.studies.back().totals);
  }

  std::vector<LabeledReport> rows;
  for (std::size_t k = 0; k < run.grid_reports.size(); ++k) {
    const auto& inst = instances[k / static_cast<std::size_t>(per)];
    rows.push_back({{"grid", std::to_string(k / static_cast<std::size_t>(per)),
                     std::string(to_string(inst.truth.spectrum.kind())),
                     std::string(to_string(inst.family)), format_number(inst.truth.s)},
                    &run.grid_reports[k]});
  }
  for (std::size_t s = 0; s < run.studies.size(); ++s) {
    const auto& study = run.studies[s];
    for (const auto& point : study.points)
      for (const auto& rep : point.reports)
        rows.push_back({{"study", std::to_string(s),
                         std::string(to_string(study.config.spectrum)),
                         std::string(to_string(study.config.family)),
                         format_number(study.config.s)},
                        &rep});
  }
  ctx.emit(ctx.options.command + "_replicates.csv",
           reports_csv({"source", "index", "spectrum", "family", "s"}, rows));

  Assertions assertions;
  ojson summary;
  summary["command"] = ctx.options.command;
  summary["grid_instances"] = static_cast<int>(instances.size());
  summary["grid_replicates"] = grid.replicates;
  summary["studies"] = static_cast<int>(run.studies.size());
  summary["tolerances"] = {{"identity", tol.identity}, {"inequality", tol.inequality}};
  summary["totals"] = suite_json(run.totals);
  if (identity_mode) {
    const bool ok = run.totals.identity_failures == 0 && run.totals.identity_checks > 0;
    assertions.add("identity_residuals", ok,
                   {{"max_residual", number(run.totals.max_identity_residual)},
                    {"failures", run.totals.identity_failures},
                    {"checks", run.totals.identity_checks},
                    {"tolerance", tol.identity}});
    ctx.log << "identities: " << run.totals.identity_checks << " checks, max residual "
            << format_number(run.totals.max_identity_residual) << ", "
            << run.totals.identity_failures << " above " << format_number(tol.identity) << '\n';
  } else {
    int evaluated = 0;
    for (const auto& c : run.totals.checks) evaluated += c.evaluated;
    assertions.add("inequality_violations",
                   run.totals.violations == 0 && evaluated > 0,
                   {{"violations", run.totals.violations}, {"evaluated", evaluated}});
    ctx.log << "inequalities: " << evaluated << " evaluated, " << run.totals.violations
            << " violations\n";
  }
  ctx.finish(assertions, std::move(summary));
  return assertions.all_passed ? kPass : kFail;
}

struct McChecks {
  std::optional<double> isotropic_se_multiplier;
  std::optional<double> max_halving_frequency;
};

McChecks read_checks(const json& cfg) {
  McChecks c;
  if (!cfg.contains("checks")) return c;
  const json& j = cfg["checks"];
  allow_keys(j, {"isotropic_expectation", "max_halving_frequency"}, "checks");
  if (j.contains("isotropic_expectation")) {
    allow_keys(j["isotropic_expectation"], {"se_multiplier"}, "checks.isotropic_expectation");
    c.isotropic_se_multiplier = get_or(j["isotropic_expectation"], "se_multiplier", 3.0);
  }
  if (j.contains("max_halving_frequency"))
    c.max_halving_frequency = get_or(j, "max_halving_frequency", 0.0);
  return c;
}

std::vector<LabeledReport> study_rows(const StudyReport& study) {
  std::vector<LabeledReport> rows;
  for (std::size_t k = 0; k < study.points.size(); ++k)
    for (const auto& rep : study.points[k].reports) rows.push_back({{std::to_string(k)}, &rep});
  return rows;
}

void add_suite_assertions(Assertions& assertions, const StudyConfig& config,
                          const SuiteSummary& totals) {
  if (config.suites.identities)
    assertions.add("identity_residuals", totals.identity_failures == 0,
                   {{"max_residual", number(totals.max_identity_residual)},
                    {"failures", totals.identity_failures},
                    {"tolerance", config.tolerances.identity}});
  if (config.suites.inequalities || config.suites.alignment)
    assertions.add("inequality_violations", totals.violations == 0,
                   {{"violations", totals.violations}});
}

int cmd_mc(RunContext& ctx) {
  StudyConfig config = study_config_from_json(ctx.config);
  config.seed = ctx.seed;
  config.threads = ctx.threads;
  const McChecks checks = read_checks(ctx.config);
  if (checks.isotropic_se_multiplier && config.spectrum != SpectrumKind::Isotropic)
    throw ConfigError("isotropic_expectation applies to isotropic spectra only");
  config.validate();

  const StudyReport study = mc_study(config);
  ctx.emit("mc_replicates.csv", reports_csv({"point"}, study_rows(study)));

  Assertions assertions;
  add_suite_assertions(assertions, config, study.totals);
  const GroundTruth truth = make_study_truth(config);
  ojson points = ojson::array();
  for (const auto& point : study.points) {
    ojson pj = point_json(point);
    if (checks.isotropic_se_multiplier) {
      const double expected =
          isotropic_bias_expectation(config.p, point.d, truth.f.squaredNorm());
      const Aggregate* bias = point.stat("bias");
      const double mean = bias ? bias->mean : kNaN;
      const double se = bias ? bias->se : kNaN;
      const double z = std::abs(mean - expected) / se;
      const bool evaluable = std::isfinite(se) && se > 0.0;
      const bool ok = !evaluable || z <= *checks.isotropic_se_multiplier;
      ojson detail = {{"n", point.n}, {"d", point.d}, {"expected", expected},
                      {"mean", number(mean)}, {"se", number(se)},
                      {"z", number(evaluable ? z : kNaN)}, {"evaluated", evaluable}};
      pj["isotropic_expectation"] = detail;
      assertions.add("isotropic_expectation", ok, detail);
    }
    if (checks.max_halving_frequency) {
      const double freq = static_cast<double>(point.summary.halving_replicates) /
                          static_cast<double>(point.summary.reports);
      assertions.add("halving_frequency", freq <= *checks.max_halving_frequency,
                     {{"n", point.n}, {"d", point.d}, {"frequency", freq},
                      {"max", *checks.max_halving_frequency}});
    }
    points.push_back(std::move(pj));
  }
  ojson summary;
  summary["command"] = "mc";
  summary["spectrum"] = spectrum_json(truth.spectrum);
  summary["f_norm2"] = truth.f.squaredNorm();
  summary["points"] = std::move(points);
  summary["totals"] = suite_json(study.totals);
  ctx.log << "mc: " << study.points.size() << " points, " << study.totals.reports
          << " replicates, " << study.totals.violations << " violations\n";
  ctx.finish(assertions, std::move(summary));
  return assertions.all_passed ? kPass : kFail;
}

int cmd_rates(RunContext& ctx) {
  StudyConfig config = study_config_from_json(ctx.config);
  config.seed = ctx.seed;
  config.threads = ctx.threads;
  if (ctx.config.contains("checks")) throw ConfigError("checks are an mc option");
  config.validate();

  std::vector<double> pilot;
  if (config.rate.oracle && config.rate.pilot_seeds > 0) {
    pilot = oracle_pilot(config);
    ctx.log << "rates: pilot ratios";
    for (double r : pilot) ctx.log << ' ' << format_number(r);
    ctx.log << '\n';
  }
  const RateResult rate = rate_study(config);
  const StudyReport& study = rate.study;
  ctx.emit("rates_replicates.csv", reports_csv({"point"}, study_rows(study)));

  OracleComparison cmp;
  if (config.rate.oracle) cmp = oracle_comparison(study, pilot);

  std::ostringstream table;
  table << "n,d,r,mean_risk,se_risk,log_n,log_metric,oracle_mean_risk,oracle_se_risk,ratio\n";
  for (std::size_t k = 0; k < study.points.size(); ++k) {
    const auto& point = study.points[k];
    const Aggregate* risk = point.stat("pred_error");
    const Aggregate* oracle = point.stat("oracle_pred_error");
    table << point.n << ',' << point.d << ',' << point.r << ','
          << format_number(risk ? risk->mean : kNaN) << ','
          << format_number(risk ? risk->se : kNaN) << ',' << format_number(rate.log_n[k])
          << ',' << format_number(rate.log_metric[k]) << ','
          << format_number(oracle ? oracle->mean : kNaN) << ','
          << format_number(oracle ? oracle->se : kNaN) << ','
          << format_number(config.rate.oracle ? cmp.ratios[k] : kNaN) << '\n';
  }
  ctx.emit("rates_points.csv", table.str());

  Assertions assertions;
  add_suite_assertions(assertions, config, study.totals);
  ojson summary;
  summary["command"] = "rates";
  summary["transform"] = std::string(to_string(config.rate.transform));
  ojson points = ojson::array();
  for (const auto& point : study.points) points.push_back(point_json(point));
  summary["points"] = std::move(points);
  summary["fit"] = {{"fitted", rate.fitted},
                    {"slope", number(rate.fitted ? rate.fit.slope : kNaN)},
                    {"intercept", number(rate.fitted ? rate.fit.intercept : kNaN)},
                    {"r2", number(rate.fitted ? rate.fit.r2 : kNaN)},
                    {"ci_low", number(rate.ci_low)},
                    {"ci_high", number(rate.ci_high)},
                    {"ci_flagged", rate.ci_flagged},
                    {"bootstrap", config.rate.bootstrap}};
  if (config.rate.target_slope) {
    const double target = *config.rate.target_slope;
    const bool ok =
        rate.fitted && std::abs(rate.fit.slope - target) <= config.rate.slope_tolerance;
    assertions.add("rate_slope", ok,
                   {{"slope", number(rate.fitted ? rate.fit.slope : kNaN)},
                    {"target", target},
                    {"tolerance", config.rate.slope_tolerance}});
  }
  if (config.rate.oracle) {
    ojson oj;
    ojson ratios = ojson::array();
    for (double r : cmp.ratios) ratios.push_back(number(r));
    oj["ratios"] = std::move(ratios);
    oj["defined"] = cmp.defined;
    oj["slope"] = number(cmp.defined ? cmp.fit.slope : kNaN);
    oj["r2"] = number(cmp.defined ? cmp.fit.r2 : kNaN);
    ojson pj = ojson::array();
    for (double r : cmp.pilot_ratios) pj.push_back(number(r));
    oj["pilot_ratios"] = pj;
    oj["ceiling"] = number(cmp.ceiling);
    oj["below_ceiling"] = cmp.below_ceiling;
    summary["oracle"] = oj;
    ctx.manifest_extra["pilot"] = {{"seeds", config.rate.pilot_seeds},
                                   {"replicates", config.rate.pilot_replicates},
                                   {"margin", config.rate.pilot_margin},
                                   {"ratios", pj},
                                   {"ceiling", number(cmp.ceiling)}};
    if (config.rate.ratio_slope_tolerance) {
      assertions.add("oracle_ratio_slope",
                     cmp.defined && std::abs(cmp.fit.slope) <= *config.rate.ratio_slope_tolerance,
                     {{"slope", number(cmp.defined ? cmp.fit.slope : kNaN)},
                      {"tolerance", *config.rate.ratio_slope_tolerance}});
    }
    if (!pilot.empty())
      assertions.add("oracle_ratio_ceiling", cmp.below_ceiling,
                     {{"ratio", number(cmp.ratios.empty() ? kNaN : cmp.ratios.back())},
                      {"ceiling", number(cmp.ceiling)}});
  }
  summary["totals"] = suite_json(study.totals);
  ctx.log << "rates: slope " << format_number(rate.fitted ? rate.fit.slope : kNaN);
  if (config.rate.oracle)
    ctx.log << ", oracle ratio slope " << format_number(cmp.defined ? cmp.fit.slope : kNaN);
  ctx.log << '\n';
  ctx.finish(assertions, std::move(summary));
  return assertions.all_passed ? kPass : kFail;
}

ojson gap_search_json(const std::optional<GapSearchResult>& found) {
  if (!found) return {{"flagged", true}};
  return {{"flagged", false},
          {"r", found->r},
          {"criterion", found->criterion},
          {"below_normalized", found->below_normalized},
          {"total_normalized", found->total_normalized},
          {"rel_gap_normalized", found->rel_gap_normalized}};
}

int cmd_grouping(RunContext& ctx) {
  const json& cfg = ctx.config;
  allow_keys(cfg, {"seed", "threads", "spectrum", "d", "c1", "C1", "c2", "sweep"}, "config");
  const SpectrumSpec ss = read_spectrum(require<json>(cfg, "spectrum", "config"));
  const Spectrum spectrum = make_spectrum(ss.kind, ss.alpha, ss.p, ss.c_ev, ss.seed);
  const int d = require<int>(cfg, "d", "config");
  const double c1 = get_or(cfg, "c1", 0.5);
  const double C1 = get_or(cfg, "C1", 2.0);
  const double c2 = get_or(cfg, "c2", 2.0);

  const Grouping grouping = build_grouping(spectrum, d, c2);
  const auto below = find_gap_index_below(spectrum, d, c1);
  const auto above = find_gap_index_above(spectrum, d, C1);

  Assertions assertions;
  std::ostringstream table;
  table << "r,defined,sum_below,sum_above,rel_gap,below_normalized,total_normalized\n";
  int defined = 0;
  double rel_min = kNaN, rel_max = kNaN;
  bool exp_ok = true;
  const double exp_bound = spectrum.kind() == SpectrumKind::Exponential
                               ? 1.0 / (1.0 - std::exp(-spectrum.alpha()))
                               : kNaN;
  for (int r = 1; r < spectrum.p(); ++r) {
    const GapReport g = gap_report(spectrum, r);
    const double norm = static_cast<double>(r) * log_er(r);
    table << r << ',' << (g.defined ? 1 : 0) << ',' << format_number(g.sum_below) << ','
          << format_number(g.sum_above) << ',' << format_number(g.rel_gap) << ','
          << format_number(g.sum_below / norm) << ','
          << format_number((g.sum_below + g.sum_above) / norm) << '\n';
    if (!g.defined) continue;
    ++defined;
    rel_min = std::isnan(rel_min) ? g.rel_gap : std::min(rel_min, g.rel_gap);
    rel_max = std::isnan(rel_max) ? g.rel_gap : std::max(rel_max, g.rel_gap);
    if (std::isfinite(exp_bound) && g.sum_below > r * exp_bound * (1.0 + 1e-12)) exp_ok = false;
  }
  ctx.emit("grouping_gaps.csv", table.str());

  bool ratio_ok = grouping.breakpoints.back() >= d;
  for (int l = 1; l <= grouping.num_blocks(); ++l) {
    const double ratio =
        spectrum.lambda(grouping.block_begin(l)) / spectrum.lambda(grouping.block_end(l));
    if (ratio > c2 * (1.0 + 1e-12)) ratio_ok = false;
  }
  assertions.add("grouping_invariants", ratio_ok,
                 {{"ratio_bound", grouping.ratio_bound}, {"c2", c2},
                  {"overshoot", grouping.overshoot}});
  if (std::isfinite(exp_bound))
    assertions.add("exponential_sum_below", exp_ok, {{"bound_per_r", exp_bound}});

  ojson summary;
  summary["command"] = "grouping";
  summary["spectrum"] = spectrum_json(spectrum);
  summary["d"] = d;
  summary["grouping"] = {{"breakpoints", grouping.breakpoints},
                         {"blocks", grouping.num_blocks()},
                         {"ratio_bound", grouping.ratio_bound},
                         {"overshoot", grouping.overshoot}};
  summary["gap_index_below"] = gap_search_json(below);
  summary["gap_index_above"] = gap_search_json(above);
  summary["gaps"] = {{"defined", defined}, {"total", spectrum.p() - 1},
                     {"rel_gap_min", number(rel_min)}, {"rel_gap_max", number(rel_max)}};

  if (cfg.contains("sweep")) {
    const json& sw = cfg["sweep"];
    allow_keys(sw, {"p", "r_min", "r_max", "top_decade_tolerance"}, "sweep");
    const int p = require<int>(sw, "p", "sweep");
    const int r_min = get_or(sw, "r_min", 2);
    const int r_max = require<int>(sw, "r_max", "sweep");
    const double tol = get_or(sw, "top_decade_tolerance", 0.2);
    if (r_min < 1 || r_max < r_min || r_max >= p)
      throw ConfigError("sweep needs 1 <= r_min <= r_max < p");
    const Spectrum big = make_spectrum(ss.kind, ss.alpha, p, ss.c_ev, ss.seed);
    const std::vector<double> profile = gap_sum_profile(big, r_min, r_max);

    std::ostringstream sweep;
    sweep << "r,total_normalized\n";
    double c_fit = kNaN, top_min = kNaN, top_max = kNaN;
    const int top_from = std::max(r_min, r_max / 10);
    for (int r = r_min; r <= r_max; ++r) {
      const double v = profile[static_cast<std::size_t>(r - r_min)];
      sweep << r << ',' << format_number(v) << '\n';
      if (std::isnan(v)) continue;
      c_fit = std::isnan(c_fit) ? v : std::max(c_fit, v);
      if (r >= top_from) {
        top_min = std::isnan(top_min) ? v : std::min(top_min, v);
        top_max = std::isnan(top_max) ? v : std::max(top_max, v);
      }
    }
    ctx.emit("grouping_sweep.csv", sweep.str());
    const double variation = (top_max - top_min) / top_max;
    ojson detail = {{"p", p}, {"r_min", r_min}, {"r_max", r_max},
                    {"fitted_constant", number(c_fit)}, {"top_decade_min", number(top_min)},
                    {"top_decade_max", number(top_max)},
                    {"top_decade_variation", number(variation)}, {"tolerance", tol}};
    summary["sweep"] = detail;
    if (std::isnan(c_fit)) {
      detail["flagged"] = true;  // no spectral gap anywhere: nothing to bound
      summary["sweep"] = detail;
    } else {
      assertions.add("gap_sum_law", std::isfinite(variation) && variation < tol, detail);
    }
  }
  ctx.log << "grouping: " << grouping.num_blocks() << " blocks, " << defined << " of "
          << spectrum.p() - 1 << " gaps defined\n";
  ctx.finish(assertions, std::move(summary));
  return assertions.all_passed ? kPass : kFail;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public API
// ---------------------------------------------------------------------------

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string version() { return PCRLAB_VERSION; }

StudyConfig study_config_from_json(const json& j) {
  allow_keys(j, {"seed", "threads", "spectrum", "truth", "design", "n_grid", "d_rule",
                 "r_rule", "grouping", "replicates", "suites", "tolerances",
                 "bound_constants", "rate", "checks"},
             "study config");
  StudyConfig c;
  c.seed = get_seed(j, "seed", c.seed);
  c.threads = get_or(j, "threads", c.threads);

  const SpectrumSpec ss = read_spectrum(require<json>(j, "spectrum", "study config"));
  c.spectrum = ss.kind;
  c.alpha = ss.kind == SpectrumKind::Isotropic ? 0.0 : ss.alpha;
  c.p = ss.p;
  c.c_ev = ss.c_ev;
  c.spectrum_seed = ss.seed;

  if (j.contains("truth")) {
    const json& t = j["truth"];
    allow_keys(t, {"s", "L", "sigma2", "h_mode"}, "truth");
    c.s = get_or(t, "s", c.s);
    c.L = get_or(t, "L", c.L);
    c.sigma2 = get_or(t, "sigma2", c.sigma2);
    if (t.contains("h_mode")) c.h_mode = h_mode_from_string(t["h_mode"].get<std::string>());
  }
  if (j.contains("design")) {
    allow_keys(j["design"], {"family"}, "design");
    if (j["design"].contains("family"))
      c.family = family_from_string(j["design"]["family"].get<std::string>());
  }
  c.n_grid = require<std::vector<int>>(j, "n_grid", "study config");
  if (j.contains("d_rule")) {
    const json& dr = j["d_rule"];
    allow_keys(dr, {"kind", "values"}, "d_rule");
    c.d_rule = d_rule_from_string(require<std::string>(dr, "kind", "d_rule"));
    c.d_values = get_or(dr, "values", c.d_values);
  }
  if (j.contains("r_rule")) {
    const json& rr = j["r_rule"];
    allow_keys(rr, {"kind", "r", "c1"}, "r_rule");
    c.r_rule = r_rule_from_string(require<std::string>(rr, "kind", "r_rule"));
    c.r_fixed = get_or(rr, "r", c.r_fixed);
    c.c1 = get_or(rr, "c1", c.c1);
  }
  if (j.contains("grouping")) {
    allow_keys(j["grouping"], {"c2"}, "grouping");
    c.c2 = get_or(j["grouping"], "c2", c.c2);
  }
  c.replicates = get_or(j, "replicates", c.replicates);
  if (j.contains("suites")) {
    const json& s = j["suites"];
    allow_keys(s, {"identities", "inequalities", "alignment"}, "suites");
    c.suites.identities = get_or(s, "identities", c.suites.identities);
    c.suites.inequalities = get_or(s, "inequalities", c.suites.inequalities);
    c.suites.alignment = get_or(s, "alignment", c.suites.alignment);
  }
  if (j.contains("tolerances")) {
    const json& t = j["tolerances"];
    allow_keys(t, {"identity", "inequality"}, "tolerances");
    c.tolerances.identity = get_or(t, "identity", c.tolerances.identity);
    c.tolerances.inequality = get_or(t, "inequality", c.tolerances.inequality);
  }
  if (j.contains("bound_constants")) {
    const json& b = j["bound_constants"];
    allow_keys(b, {"c", "C"}, "bound_constants");
    c.constants.c = get_or(b, "c", c.constants.c);
    c.constants.C = get_or(b, "C", c.constants.C);
  }
  if (j.contains("rate")) {
    const json& r = j["rate"];
    allow_keys(r, {"transform", "bootstrap", "oracle", "pilot_seeds", "pilot_replicates",
                   "pilot_margin", "target_slope", "slope_tolerance",
                   "ratio_slope_tolerance"},
               "rate");
    if (r.contains("transform"))
      c.rate.transform = rate_transform_from_string(r["transform"].get<std::string>());
    c.rate.bootstrap = get_or(r, "bootstrap", c.rate.bootstrap);
    c.rate.oracle = get_or(r, "oracle", c.rate.oracle);
    c.rate.pilot_seeds = get_or(r, "pilot_seeds", c.rate.pilot_seeds);
    c.rate.pilot_replicates = get_or(r, "pilot_replicates", c.rate.pilot_replicates);
    c.rate.pilot_margin = get_or(r, "pilot_margin", c.rate.pilot_margin);
    if (r.contains("target_slope")) c.rate.target_slope = get_or(r, "target_slope", 0.0);
    c.rate.slope_tolerance = get_or(r, "slope_tolerance", c.rate.slope_tolerance);
    if (r.contains("ratio_slope_tolerance"))
      c.rate.ratio_slope_tolerance = get_or(r, "ratio_slope_tolerance", 0.0);
  }
  return c;
}

GridConfig grid_config_from_json(const json& j) {
  allow_keys(j, {"instances", "replicates", "p_min", "p_max", "n_max", "exponential_alpha",
                 "polynomial_alpha", "c_ev", "families", "spectra", "smoothness",
                 "c2_values", "sigma2"},
             "grid");
  GridConfig g;
  g.instances = get_or(j, "instances", g.instances);
  g.replicates = get_or(j, "replicates", g.replicates);
  g.p_min = get_or(j, "p_min", g.p_min);
  g.p_max = get_or(j, "p_max", g.p_max);
  g.n_max = get_or(j, "n_max", g.n_max);
  g.exponential_alpha = get_or(j, "exponential_alpha", g.exponential_alpha);
  g.polynomial_alpha = get_or(j, "polynomial_alpha", g.polynomial_alpha);
  g.c_ev = get_or(j, "c_ev", g.c_ev);
  if (j.contains("families")) g.families = read_families(j["families"]);
  if (j.contains("spectra")) g.spectra = read_kinds(j["spectra"]);
  g.smoothness = get_or(j, "smoothness", g.smoothness);
  g.c2_values = get_or(j, "c2_values", g.c2_values);
  if (j.contains("sigma2")) {
    const auto range = get_or(j, "sigma2", std::vector<double>{});
    if (range.size() != 2) throw ConfigError("grid.sigma2 must be [min, max]");
    g.sigma2_min = range[0];
    g.sigma2_max = range[1];
  }
  g.validate();
  return g;
}

int run(const Options& options, std::ostream& log) {
  const std::string& cmd = options.command;
  if (cmd != "identities" && cmd != "inequalities" && cmd != "mc" && cmd != "rates" &&
      cmd != "grouping") {
    log << "error: unknown command '" << cmd << "'\n";
    return kUsage;
  }
  std::error_code ec;
  if (!fs::is_directory(options.out, ec)) {
    log << "error: output directory " << options.out << " does not exist\n";
    return kUsage;
  }
  RunContext ctx{options, log, {}, 1, 0, timestamp(), {}, ojson::object()};
  try {
    std::ifstream in(options.config);
    if (!in) {
      log << "error: cannot read config " << options.config << '\n';
      return kUsage;
    }
    ctx.config = json::parse(in);
    if (!ctx.config.is_object()) throw ConfigError("config must be a JSON object");
    ctx.seed = options.seed ? *options.seed : get_seed(ctx.config, "seed", 1);
    ctx.threads = options.threads ? *options.threads : get_or(ctx.config, "threads", 0);
    if (ctx.threads < 0) throw ConfigError("threads must be >= 0");
    if (cmd == "identities") return run_suite_command(ctx, {true, false, false}, true);
    if (cmd == "inequalities") return run_suite_command(ctx, {false, true, true}, false);
    if (cmd == "mc") return cmd_mc(ctx);
    if (cmd == "rates") return cmd_rates(ctx);
    return cmd_grouping(ctx);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParameterError& e) {
    log << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const json::exception& e) {
    log << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kFail;
  }
}

}  // namespace pcrlab::cli
