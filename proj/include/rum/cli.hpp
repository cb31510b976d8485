#pragma once

namespace rum::cli {

// Command-line entry point. Exit codes: 0 success (and: the market passed
// the arbitrage check), 1 domain negative result (arbitrage found), 2 input
// or cap error, 3 numerical failure. Errors print a single structured line
// "ERROR <code> <message>" on stderr.
int dispatch(int argc, const char* const* argv);

}  // namespace rum::cli
