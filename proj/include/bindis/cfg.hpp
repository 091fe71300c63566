// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Function partitioning and intra-procedural control-flow graphs over the
// true (linear-sweep) instruction stream.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bindis/decoder.hpp"

namespace bindis {

struct BasicBlock {
    size_t start = 0;            // offset of the first instruction
    std::vector<size_t> instrs;  // instruction offsets, ascending
    std::vector<size_t> succs;   // successor block start offsets
};

struct FunctionCFG {
    std::string name;
    size_t entry = 0;
    size_t end = 0; // one past the last instruction byte (padding excluded)
    std::vector<BasicBlock> blocks;      // sorted by start
    std::map<size_t, size_t> block_of;   // instruction offset -> block start
    // Stack bytes the function pops on return beyond the return address
    // (from `ret imm16`), used to model callee-cleanup at call sites.
    std::optional<uint16_t> ret_pops;

    const BasicBlock* block_at(size_t start) const {
        for (const auto& b : blocks)
            if (b.start == start)
                return &b;
        return nullptr;
    }
};

// Functions are delimited by sorted entry offsets; each spans from its entry
// to the next entry, with trailing NOP padding excluded. Blocks split at
// branches and branch targets; indirect branches contribute no edges.
std::vector<FunctionCFG> build_cfg(const SupersetListing& listing,
                                   const std::vector<size_t>& entries,
                                   const std::vector<size_t>& true_offsets);

} // namespace bindis
