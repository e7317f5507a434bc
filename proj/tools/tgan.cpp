#include <iostream>

#include "tgan/runio.hpp"

int main(int argc, char** argv) {
    return tgan::io::run_cli(argc, argv, std::cout, std::cerr);
}
