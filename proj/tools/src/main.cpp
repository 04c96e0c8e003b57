#include <iostream>
#include <string>
#include <vector>

#include "opcagent/app/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return opcagent::app::run_cli(args, std::cout, std::cerr);
}
