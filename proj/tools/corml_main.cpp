#include <iostream>

#include "corml/cli.hpp"

int main(int argc, char** argv) { return corml::run_cli(argc, argv, std::cout, std::cerr); }
