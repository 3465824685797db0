#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace pcci {

// Command-line front end. Subcommands: test, fit-cdf, simulate, benchmark.
// Returns 0 on success, 2 on usage errors, 1 on data or numeric errors.
// Every artifact embeds its fully resolved configuration; re-running with
// config.argv (plus an --output path) reproduces the artifact byte for byte.
int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
            std::ostream& err = std::cerr);

}  // namespace pcci
