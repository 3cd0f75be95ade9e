#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace sdebnn::cli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitRuntime = 2 };

/// Runs one command line (args[0] is the program name). Errors are written
/// to `err` as {"code", "message", "context"}; the return value is the exit
/// code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Every key a config for `task` may contain, with its default.
nlohmann::json default_config(std::string_view task);

/// Defaults for user["task"] (toy1d if absent), overlaid with `user` and
/// then with "key=value" overrides. Unknown keys and type mismatches throw
/// ConfigError.
nlohmann::json resolve_config(const nlohmann::json& user, const std::vector<std::string>& overrides);

}  // namespace sdebnn::cli
