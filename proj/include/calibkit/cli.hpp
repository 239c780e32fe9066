#pragma once

#include <iosfwd>

namespace calibkit {

/// Runs one `calibkit` subcommand. Returns 0 on success, 2 on invalid input
/// or usage, 1 on runtime failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace calibkit
