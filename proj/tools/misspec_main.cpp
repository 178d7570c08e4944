#include <string>
#include <vector>

#include "misspec/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return misspec::cli::run(args);
}
