#pragma once

#include <string>
#include <vector>

namespace hgcl {

/// Full command-line entry point (subcommands: generate, index, train, eval,
/// ablate). args excludes the program name. Returns the process exit code;
/// errors are printed to stderr.
int run_cli(const std::vector<std::string>& args);

}  // namespace hgcl
