#include <iostream>

#include "calibkit/cli.hpp"

int main(int argc, char** argv) { return calibkit::run_cli(argc, argv, std::cout, std::cerr); }
