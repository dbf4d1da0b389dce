#include <string>
#include <vector>

#include "dvsci/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dvsci::cli::run(args);
}
