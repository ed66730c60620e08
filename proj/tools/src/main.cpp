#include <iostream>

#include "superbunch_cli/commands.hpp"

int main(int argc, char** argv) {
  return superbunch::cli::run_cli(argc, argv, std::cout, std::cerr);
}
