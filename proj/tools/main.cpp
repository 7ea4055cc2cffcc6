#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return rrm::cli::run(argc, argv, std::cout, std::cerr); }
