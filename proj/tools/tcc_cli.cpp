#include <iostream>

#include "tcc/cli.hpp"

int main(int argc, char** argv) { return tcc::cli::run(argc, argv, std::cout, std::cerr); }
