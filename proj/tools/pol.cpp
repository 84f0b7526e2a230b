#include <iostream>

#include "pol/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pol::cli::dispatch(args, std::cout, std::cerr);
}
