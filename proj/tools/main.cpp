#include <iostream>

#include "stylefuse/cli.hpp"

int main(int argc, char** argv) { return stylefuse::cli::dispatch(argc, argv, std::cout, std::cerr); }
