#include <iostream>

#include "cli/commands.hpp"

int main(int argc, char** argv) { return hidim::cli::run_cli(argc, argv, std::cout, std::cerr); }
