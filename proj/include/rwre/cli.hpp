#pragma once

#include <filesystem>
#include <iosfwd>

#include <nlohmann/json.hpp>

#include "rwre/config.hpp"
#include "rwre/error.hpp"

namespace rwre {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitRegime = 3,
  kExitNumeric = 4,
};

int exit_code_for(ErrorKind kind);

struct CommandResult {
  int exit_code = kExitOk;
  std::filesystem::path dir;
  nlohmann::json summary;
};

/// Regime summary of the configured law; prints the JSON summary to `out`.
CommandResult cmd_env_info(const RunConfig& cfg, std::ostream& out);

/// Rate experiment for the configured target. Exit code 4 when the regime's
/// acceptance check fails.
CommandResult cmd_rates(const RunConfig& cfg, std::ostream& out);

/// Identity and oracle matrix. Failing checks are reported on `err` as
/// (seed, n, check) and give exit code 4.
CommandResult cmd_verify(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Full command-line entry point.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace rwre
