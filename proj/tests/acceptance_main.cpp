#include <iostream>
#include <string>

#include "optigap/selftest.hpp"

// Runs the full acceptance suite and prints one pass/fail line per criterion.
// argv[1] (optional): path to the CLI binary for the end-to-end checks.
int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  const bool ok = optigap::selftest::run_all(std::cout, cli);
  return ok ? 0 : 1;
}
