#include <iostream>
#include <string>
#include <vector>

#include "protrag/cli.hpp"

int main(int argc, char** argv) {
    return protrag::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
