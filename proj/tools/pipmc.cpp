#include "pipmc/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return pipmc::cli::run(argc, argv, std::cout, std::cerr); }
