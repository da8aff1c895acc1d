#include <iostream>

#include "alignve/cli.hpp"

int main(int argc, char** argv) { return alignve::run_cli(argc, argv, std::cout, std::cerr); }
