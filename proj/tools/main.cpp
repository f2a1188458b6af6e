#include <iostream>

#include "mensp/cli.hpp"

int main(int argc, char** argv) {
  return mensp::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
