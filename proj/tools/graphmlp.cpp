#include <iostream>
#include <string>
#include <vector>

#include "gmlp/cli.hpp"
#include "gmlp/log.hpp"

int main(int argc, char** argv) {
  gmlp::init_logging();
  std::vector<std::string> args(argv + 1, argv + argc);
  return gmlp::run_cli(args, std::cout, std::cerr);
}
