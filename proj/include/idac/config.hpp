#pragma once

// Run configuration files: one `key = value` per line, `#` starts a comment,
// lists are comma separated, booleans are true/false. Unknown or repeated keys
// are rejected with the offending line number; missing keys keep defaults.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "idac/trainer.hpp"

namespace idac {

TrainerConfig parse_config(const std::string& text);
/// Throws ConfigError if the file can't be read or doesn't parse.
TrainerConfig load_config(const std::filesystem::path& path);

/// Every key with its resolved value, in a fixed order; parse_config(format_config(c))
/// reproduces c exactly.
std::string format_config(const TrainerConfig& config);
std::map<std::string, std::string> config_to_map(const TrainerConfig& config);
TrainerConfig config_from_map(const std::map<std::string, std::string>& values);

const std::vector<std::string>& config_keys();

/// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace idac
