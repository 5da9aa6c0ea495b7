#include <iostream>
#include <string>
#include <vector>

#include "glns/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return glns::cli::run(args, std::cout, std::cerr);
}
