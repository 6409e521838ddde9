#include <string>
#include <vector>

#include "roomeq/cli.hpp"

int main(int argc, char** argv) {
  return roomeq::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
