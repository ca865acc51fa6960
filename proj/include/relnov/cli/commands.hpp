#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace relnov {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

// Runs one `relnov` command. `args` excludes the program name. Returns the
// process exit code: 0 success, 2 usage, format or data error, 3 numeric failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace relnov
