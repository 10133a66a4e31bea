#include <iostream>

#include "mat/cli/commands.hpp"

int main(int argc, char** argv) { return mat::cli::run(argc, argv, std::cout, std::cerr); }
