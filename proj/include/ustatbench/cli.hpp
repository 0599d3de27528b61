#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ustatbench/montecarlo.hpp"

namespace ustatbench {

/// Process exit codes. Stable across versions.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitAssertion = 2;

/// Environment variable that overrides the configured output directory.
inline constexpr const char* kOutputEnv = "USTATBENCH_OUT";

/// Flat key = value text with optional [section] headers. '#' starts a
/// comment. Keys before the first header are global; a section's keys
/// override them when that section is selected.
struct ConfigFile {
    std::map<std::string, std::string> global;
    std::map<std::string, std::map<std::string, std::string>> sections;

    /// Throws ConfigError with the line number on malformed input.
    static ConfigFile parse(std::string_view text, std::string_view origin = "<config>");
    static ConfigFile load(const std::filesystem::path& path);

    /// Global keys overlaid with the named section's.
    [[nodiscard]] std::map<std::string, std::string> resolved(std::string_view section) const;
};

/// Builds an experiment config from resolved keys. Keys starting with
/// "assert" and the key "out" are ignored here; anything else unknown is a
/// ConfigError.
[[nodiscard]] ExperimentConfig config_from_keys(ExperimentKind kind, const std::map<std::string, std::string>& keys);

struct AssertionResult {
    std::string key;
    std::string description;
    bool passed = false;
};

/// Evaluates every assertion key against the report's aggregates:
///   assert_max.<metric> = v          metric <= v
///   assert_min.<metric> = v          metric >= v
///   assert_max.<metric>@<n> = v      same, for one n of the sweep
///   assert_decreasing = <metric>     strictly decreasing over the n sweep
///   assert_last_below_first = <metric>
/// A missing or non-finite metric fails its assertion.
[[nodiscard]] std::vector<AssertionResult> evaluate_assertions(const std::map<std::string, std::string>& keys,
                                                               const McReport& report,
                                                               const std::vector<std::size_t>& n_values);

/// Entry point behind the ustatbench executable. `args` excludes the program
/// name. Returns one of the kExit* codes; never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace ustatbench
