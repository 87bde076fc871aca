#include <iostream>

#include "dgs/cli.hpp"

int main(int argc, char** argv) { return dgs::run_cli(argc, argv, std::cout, std::cerr); }
