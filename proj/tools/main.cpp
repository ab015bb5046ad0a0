#include <iostream>

#include "lpreform/cli.hpp"

int main(int argc, char** argv) { return lpreform::cli::run(argc, argv, std::cout, std::cerr); }
