#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gwkit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitPartial = 3;

/// Runs one invocation; `args` excludes the program name. JSON results go to
/// `out`, diagnostics and usage text to `err`. The config file named by
/// --config, else by $GWKIT_CONFIG, supplies defaults that flags override.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gwkit::cli
