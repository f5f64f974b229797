#include "ctq/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return ctq::run_cli(argc, argv, std::cout, std::cerr);
}
