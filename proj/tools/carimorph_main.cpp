#include <iostream>

#include "carimorph/cli.hpp"

int main(int argc, char** argv) { return carimorph::run_cli(argc, argv, std::cout, std::cerr); }
