#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stomem::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Runs one command; `args` excludes the program name. Summaries go to
/// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stomem::cli
