// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace bindis {

// Memory regions a data access can land in. Heap is part of the vocabulary
// but no static pattern produces it.
enum class Rgn : uint8_t {
    Heap = 0,
    Stack = 1,
    Rodata = 2,
    Data = 3,
    Bss = 4,
    Unknown = 5,
};

constexpr int kRgnCount = 6;

inline const char* rgn_name(Rgn r) {
    switch (r) {
    case Rgn::Heap: return "heap";
    case Rgn::Stack: return "stack";
    case Rgn::Rodata: return "rodata";
    case Rgn::Data: return "data";
    case Rgn::Bss: return "bss";
    case Rgn::Unknown: return "unknown";
    }
    return "unknown";
}

inline std::optional<Rgn> rgn_from_name(const std::string& s) {
    if (s == "heap") return Rgn::Heap;
    if (s == "stack") return Rgn::Stack;
    if (s == "rodata") return Rgn::Rodata;
    if (s == "data") return Rgn::Data;
    if (s == "bss") return Rgn::Bss;
    if (s == "unknown") return Rgn::Unknown;
    return std::nullopt;
}

// Address ranges of the global sections. Ranges are inclusive on both ends
// and pairwise disjoint.
struct RegionTable {
    struct Range {
        uint32_t start = 0;
        uint32_t end = 0; // inclusive
    };
    std::map<Rgn, Range> entries;

    void set(Rgn r, uint32_t start, uint32_t end_inclusive) {
        entries[r] = Range{start, end_inclusive};
    }

    // Region containing `addr`, if any of .data/.rodata/.bss does.
    std::optional<Rgn> classify(uint32_t addr) const {
        for (const auto& [rgn, range] : entries) {
            if (addr >= range.start && addr <= range.end)
                return rgn;
        }
        return std::nullopt;
    }

    std::optional<uint32_t> start_of(Rgn r) const {
        auto it = entries.find(r);
        if (it == entries.end())
            return std::nullopt;
        return it->second.start;
    }
};

} // namespace bindis
