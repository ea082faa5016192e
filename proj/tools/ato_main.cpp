#include <iostream>

#include "ato/commands.hpp"

int main(int argc, char** argv) { return ato::cli::main(argc, argv, std::cout, std::cerr); }
