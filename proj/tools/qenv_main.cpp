#include "qenv/experiment.hpp"

#include <iostream>

int main(int argc, char** argv) { return qenv::run_cli(argc, argv, std::cout, std::cerr); }
