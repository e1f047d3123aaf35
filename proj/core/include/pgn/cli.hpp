#pragma once

#include <string>
#include <vector>

namespace pgn {

// Entry point behind the pgn binary; returns the process exit code.
// 0 success, 1 runtime failure (single-line error on stderr), 2 usage.
int run_cli(const std::vector<std::string>& args);

}  // namespace pgn
