#pragma once

#include <iosfwd>
#include <string>

namespace hidim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

// Entry point shared by the executable and the tests. Output is written to `out` only
// after the command has fully succeeded; diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// --threads when given, else HIDIM_THREADS, else the hardware concurrency.
unsigned resolve_threads(int flag_value);

}  // namespace hidim::cli
