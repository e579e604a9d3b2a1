#include <string>
#include <vector>

#include "canopy/cli.hpp"

int main(int argc, char** argv) {
  return canopy::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
