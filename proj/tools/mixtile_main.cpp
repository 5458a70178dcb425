#include <iostream>

#include "mixtile/cli.hpp"

int main(int argc, char** argv) { return mixtile::run_cli(argc, argv, std::cout, std::cerr); }
