// Acceptance suite: runs each criterion through the CLI front end on the
// shipped configs and prints one PASS/FAIL line per criterion.

#include "pcrlab/cli.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int exit_code = 0;
  double seconds = 0.0;
  json summary;
  json manifest;
  std::string log;
};

Run run_command(const std::string& command, const std::string& config, const fs::path& root) {
  const fs::path out = root / fs::path(config).stem();
  fs::create_directories(out);
  pcrlab::cli::Options options;
  options.command = command;
  options.config = fs::path(PCRLAB_CONFIG_DIR) / config;
  options.out = out;
  std::ostringstream log;
  const auto start = std::chrono::steady_clock::now();
  Run run;
  run.exit_code = pcrlab::cli::run(options, log);
  run.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  run.log = log.str();
  const auto load = [](const fs::path& path) {
    std::ifstream in(path);
    return in ? json::parse(in, nullptr, false) : json();
  };
  run.summary = load(out / (command + "_summary.json"));
  run.manifest = load(out / (command + "_manifest.json"));
  return run;
}

const json* find_assertion(const json& summary, const std::string& name) {
  if (!summary.contains("assertions")) return nullptr;
  for (const auto& a : summary["assertions"])
    if (a["name"] == name) return &a;
  return nullptr;
}

bool all_named_pass(const json& summary, const std::string& name, int& count) {
  count = 0;
  bool ok = true;
  if (!summary.contains("assertions")) return false;
  for (const auto& a : summary["assertions"]) {
    if (a["name"] != name) continue;
    ++count;
    ok = ok && a["passed"].get<bool>();
  }
  return ok && count > 0;
}

double num(const json& j) { return j.is_number() ? j.get<double>() : std::nan(""); }

int evaluated_with_prefix(const json& checks, const std::string& prefix) {
  int total = 0;
  for (const auto& [name, tally] : checks.items())
    if (name.rfind(prefix, 0) == 0) total += tally["evaluated"].get<int>();
  return total;
}

int failures = 0;

void report(int id, const std::string& title, bool pass, double seconds, double budget,
            const std::string& detail) {
  const bool in_time = budget <= 0.0 || seconds <= budget;
  const bool ok = pass && in_time;
  if (!ok) ++failures;
  char timing[96];
  if (budget > 0.0)
    std::snprintf(timing, sizeof(timing), "%.2f s of %.0f s", seconds, budget);
  else
    std::snprintf(timing, sizeof(timing), "%.2f s", seconds);
  std::cout << "criterion " << id << " " << (ok ? "PASS" : "FAIL") << "  " << title << " ["
            << detail << "; " << timing << (in_time ? "" : ", over budget") << "]"
            << std::endl;
}

}  // namespace

int main() {
  const fs::path root = fs::temp_directory_path() / "pcrlab_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);

  {
    const Run r = run_command("identities", "identities.json", root);
    const json& t = r.summary["totals"];
    const double worst = num(t["max_identity_residual"]);
    const bool ok = r.exit_code == 0 && r.summary["grid_instances"] == 100 &&
                    t["identity_failures"] == 0 && worst <= 1e-10;
    report(1, "identity suite", ok, r.seconds, 10.0,
           "100 instances, " + std::to_string(t["identity_checks"].get<int>()) +
               " identities, max residual " + pcrlab::cli::format_number(worst));
  }
  {
    const Run r = run_command("inequalities", "inequalities.json", root);
    const json& t = r.summary["totals"];
    const json& checks = t["checks"];
    const int replicates =
        r.summary["grid_instances"].get<int>() * r.summary["grid_replicates"].get<int>();
    const int variance = evaluated_with_prefix(checks, "variance_grouped");
    const int hnorm = evaluated_with_prefix(checks, "h_norm_bound");
    const int align = evaluated_with_prefix(checks, "alignment_");
    const bool ok = r.exit_code == 0 && replicates == 1000 && t["violations"] == 0 &&
                    evaluated_with_prefix(checks, "bias_le_") > 0 &&
                    evaluated_with_prefix(checks, "source_") > 0 && variance > 0 &&
                    hnorm > 0 && align > 0;
    report(2, "deterministic inequality suite", ok, r.seconds, 60.0,
           std::to_string(replicates) + " replicates, " +
               std::to_string(t["violations"].get<int>()) + " violations; on-event checks: " +
               std::to_string(variance) + " variance, " + std::to_string(hnorm) +
               " h-norm, " + std::to_string(align) + " alignment");
  }
  {
    const Run r = run_command("mc", "isotropic_mc.json", root);
    int count = 0;
    const bool ok = r.exit_code == 0 && all_named_pass(r.summary, "isotropic_expectation", count) &&
                    count == 4;
    std::string detail;
    if (r.summary.contains("points")) {
      for (const auto& p : r.summary["points"]) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "d=%d z=%.2f", p["d"].get<int>(),
                      num(p["isotropic_expectation"]["z"]));
        detail += (detail.empty() ? "" : ", ") + std::string(buf);
      }
    }
    report(3, "isotropic exact expectation", ok, r.seconds, 60.0, detail);
  }
  {
    const Run r = run_command("mc", "halving_mc.json", root);
    const json* a = find_assertion(r.summary, "halving_frequency");
    const bool ok = r.exit_code == 0 && a && (*a)["passed"].get<bool>();
    report(4, "eigenvalue-halving event", ok, r.seconds, 0.0,
           "frequency " + pcrlab::cli::format_number(a ? num((*a)["frequency"]) : std::nan("")) +
               " over 2000 replicates");
  }
  Run poly;
  {
    poly = run_command("rates", "polynomial_rates.json", root);
    const Run& r = poly;
    const json* slope = find_assertion(r.summary, "rate_slope");
    const bool slope_ok = slope && (*slope)["passed"].get<bool>();
    char buf[160];
    std::snprintf(buf, sizeof(buf), "slope %.4f, target -2/3 +- 0.10",
                  slope ? num((*slope)["slope"]) : std::nan(""));
    report(5, "polynomial rate", slope_ok, r.seconds, 900.0, buf);
  }
  {
    const Run r = run_command("rates", "exponential_rates.json", root);
    const json* slope = find_assertion(r.summary, "rate_slope");
    const bool ok = r.exit_code == 0 && slope && (*slope)["passed"].get<bool>();
    char buf[96];
    std::snprintf(buf, sizeof(buf), "compensated slope %.4f, target 0 +- 0.15",
                  slope ? num((*slope)["slope"]) : std::nan(""));
    report(6, "exponential rate", ok, r.seconds, 600.0, buf);
  }
  {
    const Run& r = poly;
    const json* ratio = find_assertion(r.summary, "oracle_ratio_slope");
    const json* ceiling = find_assertion(r.summary, "oracle_ratio_ceiling");
    char buf[160];
    const bool pilot_recorded = r.manifest.contains("pilot") &&
                                r.manifest["pilot"]["ratios"].size() == 3;
    const bool oracle_ok = ratio && ceiling && (*ratio)["passed"].get<bool>() &&
                           (*ceiling)["passed"].get<bool>() && pilot_recorded;
    std::snprintf(buf, sizeof(buf), "ratio slope %.4f, final ratio %.4f, pilot ceiling %.4f",
                  ratio ? num((*ratio)["slope"]) : std::nan(""),
                  ceiling ? num((*ceiling)["ratio"]) : std::nan(""),
                  ceiling ? num((*ceiling)["ceiling"]) : std::nan(""));
    report(7, "oracle comparability", oracle_ok, r.seconds, 900.0, buf);
  }
  {
    const Run r = run_command("grouping", "grouping.json", root);
    const json* law = find_assertion(r.summary, "gap_sum_law");
    const bool ok = r.exit_code == 0 && law && (*law)["passed"].get<bool>();
    char buf[128];
    std::snprintf(buf, sizeof(buf), "fitted C %.4f, top-decade variation %.4f",
                  law ? num((*law)["fitted_constant"]) : std::nan(""),
                  law ? num((*law)["top_decade_variation"]) : std::nan(""));
    report(8, "gap-sum law", ok, r.seconds, 5.0, buf);
  }

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
