// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0

#include "bindis/cfg.hpp"

#include <algorithm>
#include <set>

#include "bindis/common.hpp"

namespace bindis {

namespace {

const DecodedInstr& instr_at(const SupersetListing& listing, size_t off) {
    if (off >= listing.slots.size() || !listing.slots[off])
        throw MissingGroundTruthError("no decoded instruction at offset " +
                                      std::to_string(off));
    return *listing.slots[off];
}

} // namespace

std::vector<FunctionCFG> build_cfg(const SupersetListing& listing,
                                   const std::vector<size_t>& entries,
                                   const std::vector<size_t>& true_offsets) {
    std::vector<size_t> sorted_entries = entries;
    std::sort(sorted_entries.begin(), sorted_entries.end());
    if (std::adjacent_find(sorted_entries.begin(), sorted_entries.end()) !=
        sorted_entries.end())
        throw OverlappingFunctionsError("duplicate function entry");

    std::vector<size_t> sorted_true = true_offsets;
    std::sort(sorted_true.begin(), sorted_true.end());

    std::vector<FunctionCFG> out;
    out.reserve(sorted_entries.size());

    for (size_t fi = 0; fi < sorted_entries.size(); ++fi) {
        size_t entry = sorted_entries[fi];
        size_t limit = fi + 1 < sorted_entries.size()
                           ? sorted_entries[fi + 1]
                           : (sorted_true.empty()
                                  ? entry
                                  : sorted_true.back() +
                                        instr_at(listing, sorted_true.back())
                                            .length);

        auto lo = std::lower_bound(sorted_true.begin(), sorted_true.end(), entry);
        auto hi = std::lower_bound(sorted_true.begin(), sorted_true.end(), limit);
        if (lo == hi || *lo != entry)
            throw MissingGroundTruthError(
                "function entry is not a true instruction: offset " +
                std::to_string(entry));

        std::vector<size_t> body(lo, hi);
        // Trailing alignment padding belongs to no function.
        while (!body.empty() && instr_at(listing, body.back()).is_nop() &&
               body.size() > 1)
            body.pop_back();

        FunctionCFG fn;
        fn.entry = entry;
        fn.end = body.back() + instr_at(listing, body.back()).length;

        std::set<size_t> in_body(body.begin(), body.end());

        // Leaders: the entry, every in-function branch target, and the
        // instruction following any branch or ret.
        std::set<size_t> leaders{entry};
        for (size_t off : body) {
            const DecodedInstr& ins = instr_at(listing, off);
            if (ins.is_branch && !ins.is_call() && ins.target_offset) {
                auto t = static_cast<int64_t>(*ins.target_offset);
                if (t >= 0 && in_body.count(static_cast<size_t>(t)))
                    leaders.insert(static_cast<size_t>(t));
            }
            if ((ins.is_branch && !ins.is_call()) || ins.is_ret()) {
                size_t next = off + ins.length;
                if (in_body.count(next))
                    leaders.insert(next);
            }
            if (ins.is_ret() && !ins.ops.empty() &&
                ins.ops[0].kind == Operand::Kind::Imm && !fn.ret_pops)
                fn.ret_pops = static_cast<uint16_t>(ins.ops[0].imm);
        }

        // Carve blocks between consecutive leaders.
        for (size_t off : body) {
            if (leaders.count(off)) {
                fn.blocks.emplace_back();
                fn.blocks.back().start = off;
            }
            fn.blocks.back().instrs.push_back(off);
            fn.block_of[off] = fn.blocks.back().start;
        }

        // Successor edges: conditional branches have a taken edge plus
        // fallthrough; unconditional jumps only the taken edge; rets none.
        // Calls and everything else fall through within the block or to the
        // next leader. Targets outside the function (tail calls) or indirect
        // branches contribute no edge.
        for (size_t bi = 0; bi < fn.blocks.size(); ++bi) {
            BasicBlock& b = fn.blocks[bi];
            const DecodedInstr& last = instr_at(listing, b.instrs.back());
            auto add_succ = [&](size_t target) {
                if (!fn.block_of.count(target))
                    return;
                size_t start = fn.block_of.at(target);
                if (std::find(b.succs.begin(), b.succs.end(), start) ==
                    b.succs.end())
                    b.succs.push_back(start);
            };
            if (last.is_branch && !last.is_call() && last.target_offset) {
                auto t = static_cast<int64_t>(*last.target_offset);
                if (t >= 0)
                    add_succ(static_cast<size_t>(t));
            }
            if (last.falls_through()) {
                size_t next = b.instrs.back() + last.length;
                if (bi + 1 < fn.blocks.size() && fn.blocks[bi + 1].start == next)
                    add_succ(next);
            }
        }

        out.push_back(std::move(fn));
    }
    return out;
}

} // namespace bindis
