#include <iostream>

#include "phosc/cli.hpp"

int main(int argc, char** argv) { return phosc::cli::run(argc, argv, std::cout, std::cerr); }
