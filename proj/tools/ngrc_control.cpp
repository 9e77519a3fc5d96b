#include <iostream>

#include "ngrc_control/cli.hpp"

int main(int argc, char** argv) { return ngrc::cli::run(argc, argv, std::cout, std::cerr); }
