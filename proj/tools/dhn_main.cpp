#include <iostream>
#include <string>
#include <vector>

#include "dhn/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dhn::run_cli(args, std::cout, std::cerr);
}
