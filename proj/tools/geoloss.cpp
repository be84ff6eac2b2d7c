#include <iostream>
#include <string>
#include <vector>

#include "geoloss/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return geoloss::cli::run(args, std::cout, std::cerr);
}
