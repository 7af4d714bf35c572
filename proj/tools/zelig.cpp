#include <iostream>

#include "zelig/cli.hpp"
#include "zelig/service.hpp"

int main(int argc, char** argv) {
  return zelig::cli::main(argc, argv, std::cout, std::cerr, &zelig::service::serve);
}
