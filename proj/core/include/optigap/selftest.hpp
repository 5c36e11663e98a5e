#pragma once

#include <ostream>
#include <string>

namespace optigap::selftest {

// Runs the full acceptance suite, one pass/fail line per criterion, and
// returns true iff every criterion passed. When cli_path names the command
// line binary, the end-to-end determinism criterion drives the real CLI
// twice in a scratch directory; otherwise it runs the same pipeline through
// the library entry points.
bool run_all(std::ostream& out, const std::string& cli_path = "");

}  // namespace optigap::selftest
