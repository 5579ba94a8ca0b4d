#include <iostream>

#include "matcomp/cli.hpp"

int main(int argc, char** argv) {
  return matcomp::dispatch({argv + 1, argv + argc}, std::cout, std::cerr);
}
