#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ppn {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUser = 1;     // usage, config, data, format or shape errors
inline constexpr int kExitInternal = 2;  // non-finite numbers and other internal failures

/// Runs the `ppn` command line. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ppn
