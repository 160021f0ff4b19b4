#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "cova/pipeline.hpp"

namespace cova {

using ConfigValues = std::map<std::string, std::string>;

/// Parses `key = value` lines. `#` starts a comment; `[section]` headers
/// prefix the following keys with "section."; string values may be quoted.
ConfigValues parse_config_text(std::string_view text);
ConfigValues read_config_file(const std::filesystem::path& path);

/// Applies known keys to `config`; throws ConfigError for unknown keys or
/// malformed values.
void apply_config(PipelineConfig& config, const ConfigValues& values);

/// The COVA_SEED environment variable, if set and numeric.
std::optional<std::uint64_t> seed_from_env();

}  // namespace cova
