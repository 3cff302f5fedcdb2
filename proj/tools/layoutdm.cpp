#include <iostream>
#include <string>
#include <vector>

#include "layoutdm/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return layoutdm::run_cli(args, std::cout, std::cerr);
}
