#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "xaifn/common.hpp"

namespace xaifn {

/// Subcommands run by the CLI, in pipeline order.
const std::vector<std::string>& command_names();

/// Every option a command understands, with its default value. Options
/// named "out" are output directories; the run manifest is written there.
json default_options(const std::string& command);

/// Defaults, then `config` (a JSON object), then `flags`; unknown keys are
/// rejected with USAGE.
json resolve_options(const std::string& command, const json& config, const json& flags);

/// Runs a command on fully resolved options and returns its manifest,
/// which is also written to <out>/manifest.json.
json run_command(const std::string& command, const json& options);

/// Re-runs the command recorded in a manifest.
json replay_manifest(const std::filesystem::path& manifest);

/// Content hash of a file, or of all files below a directory.
std::string hash_path(const std::filesystem::path& path);

}  // namespace xaifn
