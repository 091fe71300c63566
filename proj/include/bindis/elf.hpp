// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bindis/common.hpp"
#include "bindis/regions.hpp"

namespace bindis {

enum class SymbolKind : uint8_t { Function, Object, Other };

struct SymbolEntry {
    std::string name;
    uint32_t vaddr = 0;
    uint32_t size = 0;
    SymbolKind kind = SymbolKind::Other;
    std::string section; // name of the containing section, "" if none
};

enum class FrameBase : uint8_t { Ebp, Esp };

// One resolvable DWARF variable location.
struct DwarfVariable {
    std::string name;
    std::optional<std::string> enclosing_function;
    // Exactly one of the two location forms is set.
    std::optional<uint32_t> global_addr;
    struct FrameRel {
        FrameBase base;
        int32_t disp = 0;
    };
    std::optional<FrameRel> frame_rel;
    uint32_t byte_size = 0;
};

struct SectionInfo {
    std::string name;
    uint32_t vaddr = 0;
    uint32_t size = 0;
    bool exec = false;
};

// One executable section mapped into the concatenated code vector.
// Decoding never crosses a segment boundary.
struct ExecSegment {
    size_t code_off = 0;
    uint32_t vaddr = 0;
    uint32_t size = 0;
};

struct BinaryImage {
    std::string path;
    ByteVec code;         // concatenated executable sections
    uint32_t code_vaddr = 0;
    std::vector<ExecSegment> exec_segments;
    RegionTable regions;
    std::vector<SymbolEntry> symbols;
    std::vector<DwarfVariable> dwarf_vars;
    size_t dwarf_skipped = 0; // variables with unresolvable locations
    std::vector<SectionInfo> sections;

    bool stripped() const { return symbols.empty(); }

    std::optional<uint32_t> vaddr_of(size_t code_off) const {
        for (const auto& s : exec_segments)
            if (code_off >= s.code_off && code_off < s.code_off + s.size)
                return s.vaddr + static_cast<uint32_t>(code_off - s.code_off);
        return std::nullopt;
    }
    std::optional<size_t> offset_of(uint32_t vaddr) const {
        for (const auto& s : exec_segments)
            if (vaddr >= s.vaddr && vaddr < s.vaddr + s.size)
                return s.code_off + (vaddr - s.vaddr);
        return std::nullopt;
    }
};

BinaryImage load_elf(const std::string& path);
BinaryImage load_elf_bytes(ByteSpan bytes, const std::string& path);

// Function symbol addresses inside the code range; .plt trampolines are
// not function entries.
std::vector<uint32_t> function_entry_ground_truth(const BinaryImage& img);

} // namespace bindis
