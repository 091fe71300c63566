// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0

#include "bindis/groundtruth.hpp"

#include <algorithm>

namespace bindis {

SweepResult linear_sweep_ground_truth(const BinaryImage& img) {
    SweepResult out;
    ByteSpan code{img.code.data(), img.code.size()};
    for (const auto& seg : img.exec_segments) {
        size_t off = seg.code_off;
        size_t end = seg.code_off + seg.size;
        while (off < end) {
            auto ins = decode_at(code, off);
            if (!ins)
                throw DecodeGapError("undecodable byte at code offset " +
                                     std::to_string(off));
            if (off + ins->length > end)
                throw DecodeGapError("instruction at offset " +
                                     std::to_string(off) +
                                     " crosses a segment boundary");
            out.offsets.push_back(off);
            if (ins->is_nop())
                out.nop_offsets.insert(off);
            off += ins->length;
        }
    }
    return out;
}

PrologueInfo prologue_delta(const FunctionCFG& fn,
                            const SupersetListing& listing) {
    PrologueInfo info;
    if (fn.blocks.empty())
        return info;

    auto instr = [&](size_t off) -> const DecodedInstr& {
        return *listing.slots[off];
    };
    auto is_push_reg = [&](const DecodedInstr& i) {
        return i.mnemonic == Mnemonic::Push && i.ops.size() == 1 &&
               i.ops[0].kind == Operand::Kind::Reg;
    };
    auto is_mov_ebp_esp = [&](const DecodedInstr& i) {
        return i.mnemonic == Mnemonic::Mov && i.ops.size() == 2 &&
               i.ops[0].kind == Operand::Kind::Reg && i.ops[0].reg == Reg::Ebp &&
               i.ops[1].kind == Operand::Kind::Reg && i.ops[1].reg == Reg::Esp;
    };
    auto is_sub_esp_imm = [&](const DecodedInstr& i) {
        return i.mnemonic == Mnemonic::Sub && i.ops.size() == 2 &&
               i.ops[0].kind == Operand::Kind::Reg && i.ops[0].reg == Reg::Esp &&
               i.ops[1].kind == Operand::Kind::Imm;
    };

    const std::vector<size_t>& entry_instrs = fn.blocks.front().instrs;
    size_t idx = 0;
    int pushes = 0;
    while (idx < entry_instrs.size() && is_push_reg(instr(entry_instrs[idx]))) {
        ++pushes;
        ++idx;
    }

    if (idx < entry_instrs.size() && is_mov_ebp_esp(instr(entry_instrs[idx]))) {
        info.kind = FrameKind::Ebp;
        info.delta_ebp = -4 * pushes;
        ++idx;
        int post_pushes = 0;
        while (idx < entry_instrs.size() &&
               is_push_reg(instr(entry_instrs[idx]))) {
            ++post_pushes;
            ++idx;
        }
        int32_t locals = 0;
        if (idx < entry_instrs.size() && is_sub_esp_imm(instr(entry_instrs[idx])))
            locals = static_cast<int32_t>(instr(entry_instrs[idx]).ops[1].imm);
        info.delta_esp = info.delta_ebp - 4 * post_pushes - locals;
        return info;
    }

    // No ebp setup: esp frame, anchored after pushes and one optional
    // immediate stack reservation.
    info.kind = FrameKind::Esp;
    int32_t locals = 0;
    if (idx < entry_instrs.size() && is_sub_esp_imm(instr(entry_instrs[idx])))
        locals = static_cast<int32_t>(instr(entry_instrs[idx]).ops[1].imm);
    info.delta_esp = -4 * pushes - locals;
    info.delta_ebp = 0;
    return info;
}

RawBlockSet ext_blk_bnd_dwarf(const BinaryImage& img,
                              const std::vector<FunctionCFG>& cfgs,
                              const SupersetListing& listing) {
    if (img.dwarf_vars.empty() && img.dwarf_skipped == 0)
        throw MissingGroundTruthError("image carries no DWARF variables: " +
                                      img.path);

    std::map<std::string, PrologueInfo> prologues;
    for (const auto& fn : cfgs)
        prologues[fn.name] = prologue_delta(fn, listing);

    RawBlockSet out;
    auto add = [&](const std::string& key, int64_t start, uint32_t size,
                   const std::string& var) {
        out.boundaries[key].insert(start);
        int64_t last = size > 0 ? start + static_cast<int64_t>(size) - 1 : start;
        out.extents.push_back({key, start, last, var});
    };

    for (const auto& v : img.dwarf_vars) {
        if (v.global_addr) {
            auto rgn = img.regions.classify(*v.global_addr);
            if (!rgn) {
                ++out.skipped;
                continue;
            }
            uint32_t start = *img.regions.start_of(*rgn);
            add(rgn_name(*rgn), static_cast<int64_t>(*v.global_addr) - start,
                v.byte_size, v.name);
            continue;
        }
        if (!v.frame_rel || !v.enclosing_function) {
            ++out.skipped;
            continue;
        }
        auto it = prologues.find(*v.enclosing_function);
        if (it == prologues.end()) {
            ++out.skipped;
            continue;
        }
        const PrologueInfo& p = it->second;
        int64_t off = 0;
        if (v.frame_rel->base == FrameBase::Ebp) {
            if (p.kind != FrameKind::Ebp) {
                ++out.skipped;
                continue;
            }
            off = p.delta_ebp + v.frame_rel->disp;
        } else {
            off = p.delta_esp + v.frame_rel->disp;
        }
        add(*v.enclosing_function, off, v.byte_size, v.name);
    }
    return out;
}

std::vector<FunctionCFG> functions_from_symbols(const BinaryImage& img,
                                                const SupersetListing& listing,
                                                const SweepResult& sweep) {
    std::vector<uint32_t> vaddrs = function_entry_ground_truth(img);
    std::vector<size_t> entries;
    std::vector<std::string> names;
    for (uint32_t va : vaddrs) {
        auto off = img.offset_of(va);
        if (!off)
            throw MissingGroundTruthError("function symbol outside code: " +
                                          std::to_string(va));
        entries.push_back(*off);
    }
    auto cfgs = build_cfg(listing, entries, sweep.offsets);
    for (auto& fn : cfgs) {
        auto va = img.vaddr_of(fn.entry);
        for (const auto& sym : img.symbols)
            if (sym.kind == SymbolKind::Function && va && sym.vaddr == *va)
                fn.name = sym.name;
    }
    return cfgs;
}

RawBlockSet ext_blk_bnd_dwarf(const BinaryImage& img) {
    ByteSpan code{img.code.data(), img.code.size()};
    SupersetListing listing = superset_disassemble(code);
    SweepResult sweep = linear_sweep_ground_truth(img);
    auto cfgs = functions_from_symbols(img, listing, sweep);
    return ext_blk_bnd_dwarf(img, cfgs, listing);
}

} // namespace bindis
