#include <iostream>

#include "gwkit/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return gwkit::cli::run(args, std::cout, std::cerr);
}
