#include <iostream>

#include "posegrid/cli.hpp"

int main(int argc, char** argv) { return posegrid::cli::main_entry(argc, argv, std::cout, std::cerr); }
