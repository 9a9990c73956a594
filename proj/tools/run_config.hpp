#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "kmp/model/experiment.hpp"

namespace kmp::app {

// Everything a command needs. Sections of the text form:
//   [data] [model] [phase1] [phase2] [train] [seeds] [eval] [ablation]
struct RunConfig {
  ExperimentConfig experiment;
  std::string data_path;  // load this dataset instead of generating one
  std::size_t ablation_repeats = 5;
};

RunConfig default_run_config();

// "key = value" lines under "[section]" headers; '#' and ';' start comments.
// Unknown sections or keys and malformed values raise ParseError with the
// 1-based line number. Keys not mentioned keep their defaults.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

// Every field, defaults included, in a form parse_run_config reads back.
std::string format_run_config(const RunConfig& config);

// Writes format_run_config to dir/resolved_config.ini.
void write_resolved_config(const RunConfig& config, const std::filesystem::path& dir);

}  // namespace kmp::app
