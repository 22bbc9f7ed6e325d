#include <iostream>
#include <string>
#include <vector>

#include "fsdd/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return fsdd::run(args, std::cout, std::cerr);
}
