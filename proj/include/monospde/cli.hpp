#pragma once

#include "monospde/evolution.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace monospde {

inline constexpr std::string_view kVersion = "0.1.0";

/// Exit codes of the experiment CLI.
enum ExitCode : int {
    exit_ok = 0,
    exit_failure = 1,
    exit_config = 2,
    exit_numerical = 3,
    exit_resource = 4,
};

struct RunConfig {
    std::string subcommand;
    SolverConfig solver;
    /// Weight rate for the Picard driver; calibrated when absent.
    std::optional<double> alpha;
    std::vector<double> lambdas{1.0, 0.5, 0.25, 0.125, 0.0625};
    int halvings = 3;
    std::size_t convex_samples = 10000;
    std::size_t oracle_samples = 32;
    /// Number of per-path CSV files written (the first paths in index order).
    std::size_t dump_paths = 4;
    std::filesystem::path out = "run";
};

/// Sets one `key = value` setting. Throws ConfigError naming the key.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

/// Reads `key = value` lines; `#` starts a comment, blank lines are skipped.
void parse_config(RunConfig& cfg, std::istream& in);

/// Every setting in `key = value` form, readable by parse_config.
std::string config_text(const RunConfig& cfg);

/// Runs the CLI on argv-style arguments. Never throws; returns an ExitCode.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace monospde
