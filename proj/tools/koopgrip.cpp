#include <iostream>

#include "koopgrip/cli.hpp"

int main(int argc, char** argv) { return koopgrip::run_cli(argc, argv, std::cout, std::cerr); }
