#include <iostream>

#include "vsgdfd/cli.hpp"

int main(int argc, char** argv) { return vsgdfd::run_cli(argc, argv, std::cout, std::cerr); }
