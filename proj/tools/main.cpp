#include <iostream>

#include "graphpf/cli.hpp"

int main(int argc, char** argv) {
    return graphpf::cli::run(argc, argv, std::cout, std::cerr);
}
