#include <iostream>
#include <string>
#include <vector>

#include "finrisk/riskcli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return finrisk::run_cli(args, std::cout, std::cerr);
}
