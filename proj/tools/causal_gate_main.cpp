#include <iostream>

#include "causal_gate/cli.hpp"

int main(int argc, char** argv) { return causal_gate::cli::dispatch(argc, argv, std::cout, std::cerr); }
