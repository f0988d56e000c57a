#include <iostream>

#include "skelact/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return skelact::run_cli(args, std::cout, std::cerr);
}
