#include <string>
#include <vector>

#include "pcci/cli.hpp"

int main(int argc, char** argv) {
    return pcci::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
