#pragma once

// Batch front-end: flat key-value scenario configs with section headers,
// subcommands for curves, projections, testing bounds, covers, rate
// experiments and the verification suite. All outputs are deterministic
// given the seed.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "misspec/scenarios.hpp"

namespace misspec::cli {

struct RunConfig {
    std::string command;
    std::string scenario_path;
    std::string out_dir = ".";
    std::uint64_t master_seed = 1;
    bool seed_given = false;
    std::vector<std::pair<std::string, std::string>> overrides; // section.key -> value
};

// Parses "[section]" headers and "key = value" lines; '#' starts a comment.
// Keys are reported as "section.key". Unknown keys raise an error naming
// every valid key.
std::vector<std::pair<std::string, std::string>> parse_config_file(const std::string& path);

ScenarioSpec scenario_from_config(
    const std::vector<std::pair<std::string, std::string>>& entries);

// argv-style entry (without the program name). Returns the process exit
// status: 0 iff every contract declared by the command passed.
int run(const std::vector<std::string>& args);

} // namespace misspec::cli
