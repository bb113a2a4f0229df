#include <iostream>

#include "npsd/cli.hpp"

int main(int argc, char** argv) { return npsd::cli::run(argc, argv, std::cout, std::cerr); }
