#include <iostream>

#include "doppler/commands.hpp"

int main(int argc, char** argv) { return doppler::run_cli(argc, argv, std::cout, std::cerr); }
