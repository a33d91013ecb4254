#pragma once

// Command-line front end: `screen`, `simulate` and `sensitivity`.
//
// Exit codes: 0 success, 1 partial failure (some pairs or replications
// could not be scored), 2 usage or fatal error.

#include <iosfwd>
#include <string>
#include <vector>

namespace dpmscreen::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitFatal = 2;

/// Environment variable supplying the default seed.
inline constexpr const char* kSeedEnv = "DPMSCREEN_SEED";

/// Parses and runs one command. Machine-readable output (written file
/// paths) goes to `out`, progress and errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dpmscreen::cli
