#include <iostream>

#include "rwre/cli.hpp"

int main(int argc, char** argv) { return rwre::run_cli(argc, argv, std::cout, std::cerr); }
