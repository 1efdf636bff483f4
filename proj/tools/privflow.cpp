#include <iostream>

#include "privflow/cli.hpp"

int main(int argc, char** argv) { return privflow::run_cli(argc, argv, std::cout, std::cerr); }
