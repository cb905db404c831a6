#include <iostream>

#include "qnode/cli/app.hpp"

int main(int argc, char** argv) { return qnode::cli::run(argc, argv, std::cout, std::cerr); }
