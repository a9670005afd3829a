#include <iostream>

#include "dlstf/cli.hpp"

int main(int argc, char** argv) { return dlstf::run_cli(argc, argv, std::cout, std::cerr); }
