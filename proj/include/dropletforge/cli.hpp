#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dropletforge {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// args excludes the program name. Machine output goes to `out`, diagnostics
// and help to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dropletforge
