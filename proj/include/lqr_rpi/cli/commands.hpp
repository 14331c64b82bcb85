#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "lqr_rpi/cli/config.hpp"

namespace lqr_rpi::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitTheoryViolation = 1,  // e.g. a generated gain lost stabilization
  kExitConfigError = 2,
  kExitNumericalFailure = 3,
};

/// Runs one subcommand for an already-parsed config, writing outputs under
/// `prefix` and the one-line JSON run summary to `out` (and appending it to
/// <prefix>_summary.jsonl). Library errors propagate as exceptions.
int run_command(const ExperimentConfig& cfg, const std::string& prefix,
                std::ostream& out);

/// Full CLI entry: loads the config, applies overrides, runs, and maps every
/// failure onto the exit-code contract with a JSON error record on `err`.
int run_cli(const std::string& subcommand, const std::string& config_path,
            const std::optional<std::string>& out_prefix,
            const std::optional<std::uint64_t>& seed, std::ostream& out,
            std::ostream& err);

}  // namespace lqr_rpi::cli
