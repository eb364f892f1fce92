#include "pcrlab/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Principal component regression risk laboratory"};
  app.set_version_flag("--version", pcrlab::cli::version());
  app.require_subcommand(1);

  pcrlab::cli::Options options;
  std::uint64_t seed = 0;
  int threads = 0;

  const std::pair<const char*, const char*> commands[] = {
      {"identities", "Check exact risk identities on a grid of instances"},
      {"inequalities", "Check risk inequalities and events on a grid of instances"},
      {"mc", "Monte Carlo study over a grid of sample sizes"},
      {"rates", "Fit convergence rates and compare against the oracle"},
      {"grouping", "Gap sums, gap-index search and eigenvalue grouping"},
  };
  std::vector<CLI::App*> subs;
  std::vector<std::pair<CLI::Option*, CLI::Option*>> overrides;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", options.config, "JSON configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", options.out, "Existing output directory")->required();
    auto* s = sub->add_option("--seed", seed, "Master seed (overrides the config)");
    auto* t = sub->add_option("--threads", threads, "Worker threads, 0 = all cores")
                  ->check(CLI::NonNegativeNumber);
    subs.push_back(sub);
    overrides.emplace_back(s, t);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pcrlab::cli::kUsage;
  }

  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    options.command = subs[i]->get_name();
    if (overrides[i].first->count() > 0) options.seed = seed;
    if (overrides[i].second->count() > 0) options.threads = threads;
  }
  return pcrlab::cli::run(options, std::cerr);
}
