#include <iostream>

#include "swarmvv_cli/cli.hpp"

int main(int argc, char** argv) {
  return swarmvv::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
