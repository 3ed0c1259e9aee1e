#include <vector>

#include "mtqa/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mtqa::cli::dispatch(args);
}
