#include <iostream>

#include "scrnet/cli.hpp"

int main(int argc, char** argv) { return scrnet::run_cli(argc, argv, std::cout, std::cerr); }
