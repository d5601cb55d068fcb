#pragma once

#include <string>
#include <vector>

#include "stochhom/runconfig.hpp"

namespace stochhom::cli {

struct CommandSpec {
    std::string subcommand;
    std::string config_path;             // optional
    std::vector<std::string> overrides;  // key=value
    std::string output_dir;
    bool has_seed = false;
    std::uint64_t seed = 0;
    bool has_workers = false;
    int workers = 1;
};

/// Parses the flat sectioned key=value config file ([problem], [mesh],
/// [random], [study]); missing keys take the built-in defaults, overrides are
/// applied afterwards. Every error names the offending key (and line, when it
/// came from a file) and the result is fully validated.
pipeline::RunConfig parse_config(const std::string& path,
                                 const std::vector<std::string>& overrides);

/// Same, from in-memory text (empty string: all defaults).
pipeline::RunConfig parse_config_text(const std::string& text,
                                      const std::vector<std::string>& overrides);

/// Canonical config text with every key spelled out; parsing the echo
/// reproduces the config exactly.
std::string config_echo(const pipeline::RunConfig& config);

/// Stable process exit code per error category (config=2, solver=3,
/// placement=4, io=5, anything else 1).
int exit_code(ErrorCategory category);

}  // namespace stochhom::cli
