#include <string>
#include <vector>

#include "causalmask/cli.hpp"

int main(int argc, char** argv) {
  return causalmask::cli_main(std::vector<std::string>(argv + 1, argv + argc));
}
