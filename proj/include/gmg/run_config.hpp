#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "gmg/network.hpp"
#include "gmg/training.hpp"

namespace gmg {

/// Everything a CLI run needs. Every field has a default.
struct RunConfig {
  ModelConfig model;
  TrainHyper hyper;
  std::size_t jobs = 1;
  double holdout_fraction = 0.25;
};

/// Sets one `key = value` field. Throws ConfigError for unknown keys or
/// unparsable values.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

/// TOML-style subset: `key = value` lines, `#` comments, `[section]`
/// headers (ignored), quoted strings, `[a, b]` or `a,b` lists. Errors are
/// ParseError with the line number.
RunConfig parse_run_config(std::istream& in, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

/// Serializes every field; parsing the result reproduces cfg.
std::string format_run_config(const RunConfig& cfg);

}  // namespace gmg
