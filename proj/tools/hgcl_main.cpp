#include <string>
#include <vector>

#include "hgcl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return hgcl::run_cli(args);
}
