// SPDX-License-Identifier: Apache-2.0
#include <string>
#include <vector>

#include "hetfl/cli.hpp"

int main(int argc, char** argv) {
    return hetfl::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
