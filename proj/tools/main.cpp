#include <string>
#include <vector>

#include "gpgibbs/cli.hpp"

int main(int argc, char** argv) {
  return gpgibbs::run(std::vector<std::string>(argv, argv + argc));
}
