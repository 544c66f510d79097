#include <string>
#include <vector>

#include "virodyne/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return virodyne::run_command(args);
}
