#include <vector>

#include "musgen/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return musgen::cli::run(args);
}
