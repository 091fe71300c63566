// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Ground truth extracted from unstripped, DWARF-carrying binaries: the true
// instruction stream, function stack-frame deltas, and memory-block
// boundaries derived from variable locations.
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bindis/cfg.hpp"
#include "bindis/decoder.hpp"
#include "bindis/elf.hpp"

namespace bindis {

// Linear sweep over each executable segment. Offsets are indices into the
// image's concatenated code vector.
struct SweepResult {
    std::vector<size_t> offsets;     // every true instruction, ascending
    std::set<size_t> nop_offsets;    // subset of offsets that is NOP padding
};

// Decodes from each executable segment start, advancing by instruction
// length. Throws DecodeGapError when an undecodable byte or a segment
// boundary is hit mid-instruction.
SweepResult linear_sweep_ground_truth(const BinaryImage& img);

enum class FrameKind : uint8_t { Ebp, Esp, Unknown };

// Where the frame registers sit relative to the initial stack pointer
// (the value of esp at the function's first instruction).
struct PrologueInfo {
    FrameKind kind = FrameKind::Unknown;
    int32_t delta_ebp = 0; // initial-esp offset held in ebp (ebp frames)
    int32_t delta_esp = 0; // initial-esp offset of esp after the prologue
};

// Scans the entry block: pushes before `mov ebp, esp` set delta_ebp to
// -4 per push; with no ebp setup the function is treated as an esp frame.
PrologueInfo prologue_delta(const FunctionCFG& fn,
                            const SupersetListing& listing);

// Memory-block boundaries from DWARF variables. A variable of size n at
// offset o occupies [o, o+n-1] and contributes the boundary o. Global
// variables key by region name with section-relative offsets; frame
// variables key by function name with prologue-normalised initial-esp
// offsets.
struct RawBlockSet {
    struct Extent {
        std::string key;
        int64_t start = 0;
        int64_t end = 0; // inclusive
        std::string var;
    };
    std::map<std::string, std::set<int64_t>> boundaries;
    std::vector<Extent> extents;
    size_t skipped = 0; // variables dropped during normalisation

    bool is_boundary(const std::string& key, int64_t off) const {
        auto it = boundaries.find(key);
        return it != boundaries.end() && it->second.count(off) > 0;
    }
};

RawBlockSet ext_blk_bnd_dwarf(const BinaryImage& img,
                              const std::vector<FunctionCFG>& cfgs,
                              const SupersetListing& listing);

// Convenience form that runs the sweep and CFG construction internally.
RawBlockSet ext_blk_bnd_dwarf(const BinaryImage& img);

// Function entries as code offsets, with CFGs over the true stream.
std::vector<FunctionCFG> functions_from_symbols(const BinaryImage& img,
                                                const SupersetListing& listing,
                                                const SweepResult& sweep);

} // namespace bindis
