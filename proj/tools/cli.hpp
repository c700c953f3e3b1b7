#pragma once
#include <iosfwd>
#include <string>
#include <vector>

namespace degzero::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_domain = 2;
inline constexpr int exit_numerical = 3;
inline constexpr int exit_usage = 64;

// Runs one command line (without the program name). Artifacts go to the
// directory named by --out; a JSON summary is printed on `out`.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace degzero::cli
