#include "rdrobin/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return rdrobin::cli::dispatch(argc, argv, std::cout, std::cerr); }
