#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cardiosynth::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConfig = 3;

/// `args` excludes the program name. Errors are written to `err` as one JSON object.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cardiosynth::cli
