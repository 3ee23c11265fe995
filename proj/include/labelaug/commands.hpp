#pragma once

// The labelaug command-line tool. Exit codes: 0 success, 1 usage or
// configuration error, 2 processing failure.

#include <iosfwd>
#include <string>
#include <vector>

namespace labelaug::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace labelaug::cli
