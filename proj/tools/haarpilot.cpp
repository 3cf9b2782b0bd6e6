// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include "haarpilot/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return haarpilot::cli::run(args, std::cout, std::cerr);
}
