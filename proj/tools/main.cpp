#include <iostream>

#include "rattle/cli.hpp"

int main(int argc, char** argv) { return rattle::cli_main(argc, argv, std::cout, std::cerr); }
