// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Function-wise value-set analysis over the CFG: abstract values are sets of
// base+offset locations (initial stack pointer, global region, constant),
// capped at K entries, with delayed widening and branch-condition refinement.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bindis/cfg.hpp"
#include "bindis/decoder.hpp"
#include "bindis/groundtruth.hpp"
#include "bindis/regions.hpp"

namespace bindis {

struct AbsLoc {
    enum class Base : uint8_t { StackInit, Global, Const };
    Base base = Base::Const;
    Rgn region = Rgn::Unknown; // meaningful for Base::Global only
    int64_t off = 0;           // offset from base, or the constant itself

    auto operator<=>(const AbsLoc&) const = default;

    static AbsLoc stack(int64_t o) { return {Base::StackInit, Rgn::Unknown, o}; }
    static AbsLoc global(Rgn r, int64_t o) { return {Base::Global, r, o}; }
    static AbsLoc constant(int64_t v) { return {Base::Const, Rgn::Unknown, v}; }
};

std::string render_loc(const AbsLoc& loc);

// Top or a set of at most k_cap locations.
class AbsValue {
public:
    AbsValue() = default; // Top

    static AbsValue top() { return AbsValue(); }
    static AbsValue of(const AbsLoc& l) {
        AbsValue v;
        v.top_ = false;
        v.locs_.insert(l);
        return v;
    }
    static AbsValue of_set(std::set<AbsLoc> locs, int k_cap) {
        if (locs.empty() || static_cast<int>(locs.size()) > k_cap)
            return top();
        AbsValue v;
        v.top_ = false;
        v.locs_ = std::move(locs);
        return v;
    }

    bool is_top() const { return top_; }
    bool is_singleton() const { return !top_ && locs_.size() == 1; }
    const std::set<AbsLoc>& locs() const { return locs_; }
    const AbsLoc& only() const { return *locs_.begin(); }

    bool all_const() const {
        if (top_)
            return false;
        for (const auto& l : locs_)
            if (l.base != AbsLoc::Base::Const)
                return false;
        return true;
    }

    AbsValue shifted(int64_t delta) const {
        if (top_)
            return top();
        AbsValue v;
        v.top_ = false;
        for (const auto& l : locs_) {
            AbsLoc m = l;
            m.off += delta;
            v.locs_.insert(m);
        }
        return v;
    }

    AbsValue join(const AbsValue& other, int k_cap) const {
        if (top_ || other.top_)
            return top();
        std::set<AbsLoc> u = locs_;
        u.insert(other.locs_.begin(), other.locs_.end());
        return of_set(std::move(u), k_cap);
    }

    bool operator==(const AbsValue&) const = default;

private:
    bool top_ = true;
    std::set<AbsLoc> locs_;
};

std::string render_value(const AbsValue& v);

// Comparison fact available for refining the next conditional branch.
struct CmpFact {
    bool subject_is_slot = false;
    Reg reg = Reg::Eax;
    int64_t slot_off = 0;
    int64_t rhs = 0;

    bool operator==(const CmpFact&) const = default;
};

// Machine state at a program point: the eight registers, tracked dword
// stack slots keyed by initial-esp offset (absent slot reads Top), and the
// pending comparison fact.
struct AbsState {
    bool reachable = false;
    std::array<AbsValue, 8> regs; // Top by default
    std::map<int64_t, AbsValue> slots;
    std::optional<CmpFact> cmp;

    AbsValue& reg(Reg r) { return regs[static_cast<size_t>(r)]; }
    const AbsValue& reg(Reg r) const { return regs[static_cast<size_t>(r)]; }

    static AbsState function_entry() {
        AbsState s;
        s.reachable = true;
        s.reg(Reg::Esp) = AbsValue::of(AbsLoc::stack(0));
        return s;
    }

    bool operator==(const AbsState&) const = default;
};

struct VsaConfig {
    int k_cap = 16;        // max locations per value set
    int widen_after = 3;   // growth joins tolerated per block before widening
    size_t slot_cap = 256; // max tracked stack slots
    size_t max_visits = 100000;
};

struct VsaResult {
    std::map<size_t, AbsState> pre;      // instruction offset -> pre-state
    std::map<size_t, AbsState> block_in; // reachable block start -> in-state
    size_t visits = 0;
};

// Evaluates the address of a memory operand under a state. Returns Top when
// the base or the scaled index is not resolvable to offsets.
AbsValue eval_mem_addr(const AbsState& s, const MemOperand& m,
                       const RegionTable& regions, int k_cap);

VsaResult func_wise_vsa(const FunctionCFG& fn, const SupersetListing& listing,
                        const RegionTable& regions,
                        const std::map<size_t, uint16_t>& callee_pops = {},
                        const VsaConfig& cfg = {});

// Memory-block boundaries implied by a set of predicted boundary-relevant
// instructions: each resolvable access address becomes a boundary, keyed by
// region name for globals and by the function name for stack offsets.
struct MemBlockSet {
    std::map<std::string, std::set<int64_t>> boundaries;
};

MemBlockSet get_mem_blocks_from_disa(const FunctionCFG& fn,
                                     const SupersetListing& listing,
                                     const RegionTable& regions,
                                     const std::vector<size_t>& pred_offsets,
                                     const VsaResult& vsa);

// Renders "(-16)@discard_moves" for singletons and "{8,16,24}@data" for
// larger sets, keys in lexicographic order joined by "; ".
std::string render_mem_blocks(const MemBlockSet& blocks);

// Boundary-relevant instruction identification: a true instruction is BRel
// when one of its resolved access addresses hits a ground-truth boundary.
struct BRelResult {
    std::map<std::string, std::set<size_t>> by_key;
    std::set<size_t> instrs;
};

BRelResult id_instr_touch_mem(const FunctionCFG& fn,
                              const SupersetListing& listing,
                              const RegionTable& regions,
                              const RawBlockSet& gt, const VsaResult& vsa);

} // namespace bindis
