#include <iostream>

#include "convtn/cli/commands.hpp"

int main(int argc, char** argv) { return convtn::cli::run_cli(argc, argv, std::cout, std::cerr); }
