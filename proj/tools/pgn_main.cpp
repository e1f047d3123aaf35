#include <string>
#include <vector>

#include "pgn/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pgn::run_cli(args);
}
