#include <iostream>

#include "hmad/cli.hpp"

int main(int argc, char** argv) { return hmad::run_cli(argc, argv, std::cout, std::cerr); }
