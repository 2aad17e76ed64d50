#include <iostream>

#include "qstream/cli.hpp"

int main(int argc, char** argv) { return qstream::cli::run(argc, argv, std::cout, std::cerr); }
