#pragma once

#include <iosfwd>

namespace hetplan::cli {

// Exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitInfeasible = 3;

// Entry point shared by the `hetplan` binary and the acceptance suite.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hetplan::cli
