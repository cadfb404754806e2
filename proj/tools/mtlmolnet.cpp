#include <iostream>

#include "mtlmol/cli.hpp"

int main(int argc, char** argv) { return mtlmol::cli::run(argc, argv, std::cout, std::cerr); }
