#include <iostream>

#include "crvm/cli.hpp"

int main(int argc, char** argv) {
  return crvm::cli::cli_main(argc, argv, std::cout, std::cerr);
}
