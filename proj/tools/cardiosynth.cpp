#include <iostream>

#include "cardiosynth/cli/cli.hpp"

int main(int argc, char** argv) {
  return cardiosynth::cli::dispatch(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
