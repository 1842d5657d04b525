#include <iostream>

#include "biasprobe/cli.hpp"

int main(int argc, char** argv) { return biasprobe::run_cli(argc, argv, std::cout, std::cerr); }
