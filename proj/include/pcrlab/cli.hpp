#pragma once

#include "pcrlab/harness.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcrlab::cli {

enum ExitCode : int { kPass = 0, kFail = 1, kUsage = 2 };

/// Malformed or inconsistent configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string command;  // identities | inequalities | mc | rates | grouping
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

/// Runs one command and returns its exit code. Progress and failures are
/// written to `log`; report files go to options.out, which must exist.
int run(const Options& options, std::ostream& log);

// Config readers. Unknown keys are rejected so that typos do not silently
// fall back to defaults.
StudyConfig study_config_from_json(const nlohmann::json& j);
GridConfig grid_config_from_json(const nlohmann::json& j);

/// "%.17g", with "nan" / "inf" / "-inf" for non-finite values.
std::string format_number(double value);

std::string version();

}  // namespace pcrlab::cli
