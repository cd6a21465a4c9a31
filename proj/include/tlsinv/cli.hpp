#pragma once

#include <iosfwd>

namespace tlsinv {

/// Exit codes of the command line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Subcommands: simulate, process, detect, evaluate, maps, fit.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int cli_main(int argc, const char* const* argv);

}  // namespace tlsinv
