#include <iostream>

#include "jumpguard/cli.hpp"

int main(int argc, char** argv) { return jumpguard::cli::run_cli(argc, argv, std::cout, std::cerr); }
