#pragma once

#include <string>
#include <vector>

namespace pantcr::cli {

// Runs one subcommand (args exclude the program name).
// Exit codes: 0 success, 1 validation failure, 2 runtime failure.
int dispatch(const std::vector<std::string>& args);

}  // namespace pantcr::cli
