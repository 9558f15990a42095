#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace framerl {

// Exit codes are part of the interface: scripts branch on transport-vs-input.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitTransport = 3;

// Runs one invocation. args excludes the program name. Reports and
// diagnostics go to the given streams so tests can pin exact bytes.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace framerl
