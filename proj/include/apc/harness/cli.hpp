#pragma once

namespace apc::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;  // acceptance check failed
inline constexpr int kExitConfig = 2;  // bad flags, config or input files

// `apc <subcommand> [flags]`. Settings apply in this order: defaults,
// --config file, --set overrides, then the dedicated flags.
int run_cli(int argc, char** argv);

}  // namespace apc::harness
