#include <iostream>

#include "taskforge/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return taskforge::dispatch(args, std::cout, std::cerr);
}
