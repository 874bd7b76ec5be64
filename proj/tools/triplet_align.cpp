#include <iostream>
#include <string>
#include <vector>

#include "tripletalign/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return tripletalign::cli::run(args, std::cout, std::cerr);
}
