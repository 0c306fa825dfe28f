#include <iostream>

#include "hdfeat/cli.hpp"

int main(int argc, char** argv) { return hdfeat::cli::run(argc, argv, std::cout, std::cerr); }
