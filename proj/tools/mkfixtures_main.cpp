// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Writes the synthetic ELF fixture set (loop fixture, loader edge cases and
// the three-binary training corpus) into a directory.

#include <iostream>
#include <string>

#include "bindis/synth.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: mkfixtures <dir>\n";
        return 2;
    }
    const std::string dir = argv[1];
    try {
        for (const auto& name : bindis::synth::write_fixture_dir(dir))
            std::cout << name << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
