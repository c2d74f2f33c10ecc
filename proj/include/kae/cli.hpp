#pragma once

#include <string>
#include <vector>

namespace kae {

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;  // I/O or other runtime failure
inline constexpr int kExitUsage = 2;    // bad arguments or failed validation

// Entry point of the `kae` tool: synth, train, detect, eval.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace kae
