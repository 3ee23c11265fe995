#include "labelaug/commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return labelaug::cli::run(argc, argv, std::cout, std::cerr); }
