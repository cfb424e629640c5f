#include <iostream>

#include "randgan/cli.hpp"

int main(int argc, char** argv) {
  return randgan::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
