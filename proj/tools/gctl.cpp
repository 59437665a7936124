#include "gctl/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return gctl::cli::run(argc, argv, std::cout, std::cerr); }
