#pragma once

#include <iosfwd>

namespace phosc::cli {

// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Entry point behind the phosc executable: synth, encode, train, eval,
// decode, gradcheck. Results go to out, diagnostics and progress to err.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace phosc::cli
