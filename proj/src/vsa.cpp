// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0

#include "bindis/vsa.hpp"

#include <algorithm>

#include "bindis/common.hpp"

namespace bindis {

namespace {

int64_t wrap32(int64_t v) {
    return static_cast<int64_t>(static_cast<uint32_t>(v));
}

// a (+|-) b where b must resolve to constants; bases shift by the constant,
// constants wrap at 32 bits.
AbsValue combine_add(const AbsValue& a, const AbsValue& b, int k_cap,
                     int sign) {
    if (a.is_top() || b.is_top())
        return AbsValue::top();
    if (b.all_const()) {
        std::set<AbsLoc> out;
        for (const auto& la : a.locs()) {
            for (const auto& lb : b.locs()) {
                AbsLoc m = la;
                m.off += sign * lb.off;
                if (m.base == AbsLoc::Base::Const)
                    m.off = wrap32(m.off);
                out.insert(m);
            }
        }
        return AbsValue::of_set(std::move(out), k_cap);
    }
    if (a.all_const() && sign > 0)
        return combine_add(b, a, k_cap, sign);
    return AbsValue::top();
}

AbsValue combine_mul(const AbsValue& a, const AbsValue& b, int k_cap) {
    if (a.is_top() || b.is_top() || !a.all_const() || !b.all_const())
        return AbsValue::top();
    std::set<AbsLoc> out;
    for (const auto& la : a.locs())
        for (const auto& lb : b.locs())
            out.insert(AbsLoc::constant(wrap32(la.off * lb.off)));
    return AbsValue::of_set(std::move(out), k_cap);
}

AbsValue combine_bitwise(const AbsValue& a, const AbsValue& b, int k_cap,
                         Mnemonic op) {
    if (a.is_top() || b.is_top() || !a.all_const() || !b.all_const())
        return AbsValue::top();
    std::set<AbsLoc> out;
    for (const auto& la : a.locs()) {
        for (const auto& lb : b.locs()) {
            uint32_t x = static_cast<uint32_t>(la.off);
            uint32_t y = static_cast<uint32_t>(lb.off);
            uint32_t r = op == Mnemonic::And ? (x & y)
                         : op == Mnemonic::Or ? (x | y)
                                              : (x ^ y);
            out.insert(AbsLoc::constant(static_cast<int64_t>(r)));
        }
    }
    return AbsValue::of_set(std::move(out), k_cap);
}

bool cmp_holds(int64_t lhs, int64_t rhs, Cond cc) {
    auto sc = static_cast<int32_t>(static_cast<uint32_t>(lhs));
    auto sr = static_cast<int32_t>(static_cast<uint32_t>(rhs));
    auto uc = static_cast<uint32_t>(lhs);
    auto ur = static_cast<uint32_t>(rhs);
    switch (cc) {
    case Cond::E: return uc == ur;
    case Cond::Ne: return uc != ur;
    case Cond::L: return sc < sr;
    case Cond::Ge: return sc >= sr;
    case Cond::Le: return sc <= sr;
    case Cond::G: return sc > sr;
    case Cond::B: return uc < ur;
    case Cond::Ae: return uc >= ur;
    case Cond::Be: return uc <= ur;
    case Cond::A: return uc > ur;
    default: return true;
    }
}

bool refinable_cond(Cond cc) {
    switch (cc) {
    case Cond::E: case Cond::Ne: case Cond::L: case Cond::Ge:
    case Cond::Le: case Cond::G: case Cond::B: case Cond::Ae:
    case Cond::Be: case Cond::A:
        return true;
    default:
        return false;
    }
}

struct Ctx {
    const RegionTable& regions;
    const std::map<size_t, uint16_t>& callee_pops;
    const VsaConfig& cfg;
};

// Stack slot lookup treating absent entries as Top.
AbsValue slot_value(const AbsState& s, int64_t off) {
    auto it = s.slots.find(off);
    return it == s.slots.end() ? AbsValue::top() : it->second;
}

void clear_fact_for_reg(AbsState& s, Reg r) {
    if (s.cmp && !s.cmp->subject_is_slot && s.cmp->reg == r)
        s.cmp.reset();
}

void clear_fact_for_slot_range(AbsState& s, int64_t lo, int64_t hi) {
    if (s.cmp && s.cmp->subject_is_slot && s.cmp->slot_off >= lo &&
        s.cmp->slot_off <= hi)
        s.cmp.reset();
}

// A dword store at offset o stomps any tracked slot within three bytes.
void erase_overlap(AbsState& s, int64_t o, bool keep_center) {
    clear_fact_for_slot_range(s, o - 3, o + 3);
    auto it = s.slots.lower_bound(o - 3);
    while (it != s.slots.end() && it->first <= o + 3) {
        if (keep_center && it->first == o)
            ++it;
        else
            it = s.slots.erase(it);
    }
}

void do_store(AbsState& s, const AbsValue& addr, const AbsValue& val,
              const Ctx& ctx) {
    if (addr.is_top()) {
        s.slots.clear();
        if (s.cmp && s.cmp->subject_is_slot)
            s.cmp.reset();
        return;
    }
    std::vector<int64_t> stack_offs;
    for (const auto& l : addr.locs())
        if (l.base == AbsLoc::Base::StackInit)
            stack_offs.push_back(l.off);
    if (stack_offs.empty())
        return; // global memory is untracked
    bool strong = addr.is_singleton() && stack_offs.size() == 1;
    if (strong && !val.is_top()) {
        int64_t o = stack_offs[0];
        erase_overlap(s, o, true);
        s.slots[o] = val;
        if (s.slots.size() > ctx.cfg.slot_cap)
            s.slots.erase(o);
        return;
    }
    for (int64_t o : stack_offs)
        erase_overlap(s, o, false);
}

AbsValue do_load(const AbsState& s, const AbsValue& addr, int k_cap) {
    if (addr.is_top())
        return AbsValue::top();
    AbsValue acc;
    bool first = true;
    for (const auto& l : addr.locs()) {
        if (l.base != AbsLoc::Base::StackInit)
            return AbsValue::top();
        AbsValue v = slot_value(s, l.off);
        acc = first ? v : acc.join(v, k_cap);
        first = false;
    }
    return first ? AbsValue::top() : acc;
}

} // namespace

AbsValue eval_mem_addr(const AbsState& s, const MemOperand& m,
                       const RegionTable& regions, int k_cap) {
    if (m.addr16)
        return AbsValue::top();
    if (m.absolute) {
        uint32_t addr = static_cast<uint32_t>(m.disp);
        if (auto r = regions.classify(addr))
            return AbsValue::of(AbsLoc::global(
                *r, static_cast<int64_t>(addr) - *regions.start_of(*r)));
        return AbsValue::of(AbsLoc::constant(addr));
    }
    AbsValue v = m.base ? s.reg(*m.base) : AbsValue::of(AbsLoc::constant(0));
    if (m.index) {
        AbsValue idx = s.reg(*m.index);
        AbsValue scaled =
            combine_mul(idx, AbsValue::of(AbsLoc::constant(m.scale)), k_cap);
        v = combine_add(v, scaled, k_cap, +1);
    }
    if (m.disp != 0 || m.has_disp)
        v = combine_add(v, AbsValue::of(AbsLoc::constant(m.disp)), k_cap, +1);
    // Constant addresses inside a known section are that section's offsets.
    if (!v.is_top()) {
        std::set<AbsLoc> canon;
        for (const auto& l : v.locs()) {
            if (l.base == AbsLoc::Base::Const) {
                uint32_t addr = static_cast<uint32_t>(l.off);
                if (auto r = regions.classify(addr)) {
                    canon.insert(AbsLoc::global(
                        *r,
                        static_cast<int64_t>(addr) - *regions.start_of(*r)));
                    continue;
                }
            }
            canon.insert(l);
        }
        v = AbsValue::of_set(std::move(canon), k_cap);
    }
    return v;
}

namespace {

AbsValue eval_src(const AbsState& s, const Operand& op, uint8_t width,
                  const Ctx& ctx) {
    switch (op.kind) {
    case Operand::Kind::Imm:
        return AbsValue::of(AbsLoc::constant(wrap32(op.imm)));
    case Operand::Kind::Reg:
        return op.reg_width == 4 ? s.reg(op.reg) : AbsValue::top();
    case Operand::Kind::Mem: {
        if (width != 4)
            return AbsValue::top();
        AbsValue addr = eval_mem_addr(s, op.mem, ctx.regions, ctx.cfg.k_cap);
        return do_load(s, addr, ctx.cfg.k_cap);
    }
    }
    return AbsValue::top();
}

void write_reg(AbsState& s, Reg r, const AbsValue& v, uint8_t width) {
    s.reg(r) = width == 4 ? v : AbsValue::top();
    clear_fact_for_reg(s, r);
}

// `and reg, mask` used for stack alignment keeps a tracked value when every
// member is already aligned (the initial stack pointer is assumed 16-byte
// aligned, so masks up to 16 are safe on StackInit offsets).
bool alignment_noop(const AbsState& s, const DecodedInstr& ins) {
    if (ins.ops.size() != 2 || ins.ops[0].kind != Operand::Kind::Reg ||
        ins.ops[0].reg_width != 4 || ins.ops[1].kind != Operand::Kind::Imm)
        return false;
    uint32_t mask = static_cast<uint32_t>(ins.ops[1].imm);
    uint32_t align = ~mask + 1;
    if (align == 0 || (align & (align - 1)) != 0 || align > 16)
        return false;
    const AbsValue& cur = s.reg(ins.ops[0].reg);
    if (cur.is_top())
        return false;
    for (const auto& l : cur.locs()) {
        if (l.base == AbsLoc::Base::Global)
            return false;
        if ((static_cast<uint64_t>(l.off) & (align - 1)) != 0)
            return false;
    }
    return true;
}

// Read-modify-write for two-operand arithmetic on either destination kind.
template <typename Op>
void arith(AbsState& s, const DecodedInstr& ins, const Ctx& ctx, Op op) {
    s.cmp.reset(); // flags rewritten
    const Operand& dst = ins.ops[0];
    AbsValue src = ins.ops.size() > 1
                       ? eval_src(s, ins.ops[1], ins.width, ctx)
                       : AbsValue::of(AbsLoc::constant(1));
    if (dst.kind == Operand::Kind::Reg) {
        AbsValue cur = dst.reg_width == 4 ? s.reg(dst.reg) : AbsValue::top();
        write_reg(s, dst.reg, op(cur, src), dst.reg_width);
        return;
    }
    AbsValue addr = eval_mem_addr(s, dst.mem, ctx.regions, ctx.cfg.k_cap);
    if (ins.width != 4) {
        do_store(s, addr, AbsValue::top(), ctx);
        return;
    }
    AbsValue cur = do_load(s, addr, ctx.cfg.k_cap);
    do_store(s, addr, op(cur, src), ctx);
}

void transfer(AbsState& s, const DecodedInstr& ins, const Ctx& ctx) {
    int k = ctx.cfg.k_cap;
    switch (ins.mnemonic) {
    case Mnemonic::Mov: {
        const Operand& dst = ins.ops[0];
        AbsValue v = eval_src(s, ins.ops[1], ins.width, ctx);
        if (dst.kind == Operand::Kind::Reg) {
            write_reg(s, dst.reg, v, dst.reg_width);
        } else {
            AbsValue addr = eval_mem_addr(s, dst.mem, ctx.regions, k);
            do_store(s, addr, ins.width == 4 ? v : AbsValue::top(), ctx);
        }
        break;
    }
    case Mnemonic::Lea: {
        AbsValue v = eval_mem_addr(s, ins.ops[1].mem, ctx.regions, k);
        write_reg(s, ins.ops[0].reg, v, ins.ops[0].reg_width);
        break;
    }
    case Mnemonic::Push: {
        AbsValue v = eval_src(s, ins.ops[0], ins.width, ctx);
        AbsValue esp = s.reg(Reg::Esp).shifted(-4);
        s.reg(Reg::Esp) = esp;
        clear_fact_for_reg(s, Reg::Esp);
        do_store(s, esp, v, ctx);
        break;
    }
    case Mnemonic::Pop: {
        AbsValue v = do_load(s, s.reg(Reg::Esp), k);
        const Operand& dst = ins.ops[0];
        if (dst.kind == Operand::Kind::Reg) {
            write_reg(s, dst.reg, v, dst.reg_width);
        } else {
            AbsValue addr = eval_mem_addr(s, dst.mem, ctx.regions, k);
            do_store(s, addr, v, ctx);
        }
        s.reg(Reg::Esp) = s.reg(Reg::Esp).shifted(4);
        clear_fact_for_reg(s, Reg::Esp);
        break;
    }
    case Mnemonic::Add:
        arith(s, ins, ctx,
              [k](const AbsValue& a, const AbsValue& b) {
                  return combine_add(a, b, k, +1);
              });
        break;
    case Mnemonic::Sub:
        arith(s, ins, ctx,
              [k](const AbsValue& a, const AbsValue& b) {
                  return combine_add(a, b, k, -1);
              });
        break;
    case Mnemonic::Inc:
        arith(s, ins, ctx,
              [k](const AbsValue& a, const AbsValue& b) {
                  return combine_add(a, b, k, +1);
              });
        break;
    case Mnemonic::Dec:
        arith(s, ins, ctx,
              [k](const AbsValue& a, const AbsValue& b) {
                  return combine_add(a, b, k, -1);
              });
        break;
    case Mnemonic::Xor:
    case Mnemonic::And:
    case Mnemonic::Or: {
        if (ins.mnemonic == Mnemonic::Xor &&
            ins.ops[0].kind == Operand::Kind::Reg &&
            ins.ops[1].kind == Operand::Kind::Reg &&
            ins.ops[0].reg == ins.ops[1].reg && ins.ops[0].reg_width == 4) {
            s.cmp.reset();
            write_reg(s, ins.ops[0].reg, AbsValue::of(AbsLoc::constant(0)), 4);
            break;
        }
        if (ins.mnemonic == Mnemonic::And && alignment_noop(s, ins)) {
            s.cmp.reset(); // flags change, the value does not
            break;
        }
        Mnemonic op = ins.mnemonic;
        arith(s, ins, ctx,
              [k, op](const AbsValue& a, const AbsValue& b) {
                  return combine_bitwise(a, b, k, op);
              });
        break;
    }
    case Mnemonic::Imul: {
        s.cmp.reset();
        AbsValue lhs = ins.ops.size() == 3
                           ? eval_src(s, ins.ops[1], ins.width, ctx)
                           : (ins.ops[0].reg_width == 4 ? s.reg(ins.ops[0].reg)
                                                        : AbsValue::top());
        AbsValue rhs = eval_src(s, ins.ops.back(), ins.width, ctx);
        write_reg(s, ins.ops[0].reg, combine_mul(lhs, rhs, k),
                  ins.ops[0].reg_width);
        break;
    }
    case Mnemonic::Cmp: {
        s.cmp.reset();
        if (ins.ops.size() != 2 || ins.width != 4)
            break;
        AbsValue rhs = eval_src(s, ins.ops[1], ins.width, ctx);
        if (!(rhs.is_singleton() &&
              rhs.only().base == AbsLoc::Base::Const))
            break;
        CmpFact fact;
        fact.rhs = rhs.only().off;
        const Operand& lhs = ins.ops[0];
        if (lhs.kind == Operand::Kind::Reg && lhs.reg_width == 4) {
            fact.subject_is_slot = false;
            fact.reg = lhs.reg;
            s.cmp = fact;
        } else if (lhs.kind == Operand::Kind::Mem) {
            AbsValue addr = eval_mem_addr(s, lhs.mem, ctx.regions, k);
            if (addr.is_singleton() &&
                addr.only().base == AbsLoc::Base::StackInit) {
                fact.subject_is_slot = true;
                fact.slot_off = addr.only().off;
                s.cmp = fact;
            }
        }
        break;
    }
    case Mnemonic::Test:
        s.cmp.reset();
        break;
    case Mnemonic::Call: {
        s.cmp.reset();
        s.reg(Reg::Eax) = AbsValue::top();
        s.reg(Reg::Ecx) = AbsValue::top();
        s.reg(Reg::Edx) = AbsValue::top();
        const AbsValue& esp = s.reg(Reg::Esp);
        if (esp.is_singleton() &&
            esp.only().base == AbsLoc::Base::StackInit) {
            // The callee owns everything below the current stack pointer.
            int64_t e = esp.only().off;
            s.slots.erase(s.slots.begin(), s.slots.lower_bound(e));
        } else {
            s.slots.clear();
        }
        if (ins.target_offset) {
            auto it = ctx.callee_pops.find(
                static_cast<size_t>(*ins.target_offset));
            if (it != ctx.callee_pops.end())
                s.reg(Reg::Esp) = s.reg(Reg::Esp).shifted(it->second);
        }
        break;
    }
    case Mnemonic::Leave: {
        AbsValue frame = s.reg(Reg::Ebp);
        write_reg(s, Reg::Ebp, do_load(s, frame, k), 4);
        s.reg(Reg::Esp) = frame.shifted(4);
        clear_fact_for_reg(s, Reg::Esp);
        break;
    }
    case Mnemonic::Setcc:
    case Mnemonic::Movzx:
    case Mnemonic::Movsx:
        if (ins.ops[0].kind == Operand::Kind::Reg)
            write_reg(s, ins.ops[0].reg, AbsValue::top(), 1);
        else
            do_store(s, eval_mem_addr(s, ins.ops[0].mem, ctx.regions, k),
                     AbsValue::top(), ctx);
        break;
    case Mnemonic::Jcc:
    case Mnemonic::Jmp:
    case Mnemonic::Ret:
    case Mnemonic::Nop:
    case Mnemonic::Endbr32:
    case Mnemonic::Endbr64:
        break;
    }
}

std::optional<AbsState> refine(const AbsState& s, const CmpFact& f, Cond cc,
                               bool taken, int k_cap) {
    if (!refinable_cond(cc))
        return s;
    AbsValue subject =
        f.subject_is_slot ? slot_value(s, f.slot_off) : s.reg(f.reg);
    if (subject.is_top())
        return s;
    std::set<AbsLoc> kept;
    for (const auto& l : subject.locs()) {
        if (l.base != AbsLoc::Base::Const) {
            kept.insert(l);
            continue;
        }
        if (cmp_holds(l.off, f.rhs, cc) == taken)
            kept.insert(l);
    }
    if (kept.empty())
        return std::nullopt; // branch direction is infeasible
    AbsState out = s;
    AbsValue nv = AbsValue::of_set(std::move(kept), k_cap);
    if (f.subject_is_slot)
        out.slots[f.slot_off] = nv;
    else
        out.reg(f.reg) = nv;
    return out;
}

AbsState join_states(const AbsState& a, const AbsState& b, int k_cap) {
    AbsState r;
    r.reachable = true;
    for (size_t i = 0; i < a.regs.size(); ++i)
        r.regs[i] = a.regs[i].join(b.regs[i], k_cap);
    for (const auto& [off, v] : a.slots) {
        auto it = b.slots.find(off);
        if (it == b.slots.end())
            continue; // absent slot is Top
        AbsValue j = v.join(it->second, k_cap);
        if (!j.is_top())
            r.slots[off] = j;
    }
    if (a.cmp && b.cmp && *a.cmp == *b.cmp)
        r.cmp = a.cmp;
    return r;
}

void widen_changed(const AbsState& old, AbsState& joined) {
    for (size_t i = 0; i < joined.regs.size(); ++i)
        if (!(joined.regs[i] == old.regs[i]))
            joined.regs[i] = AbsValue::top();
    for (auto it = joined.slots.begin(); it != joined.slots.end();) {
        auto old_it = old.slots.find(it->first);
        if (old_it == old.slots.end() || !(old_it->second == it->second))
            it = joined.slots.erase(it);
        else
            ++it;
    }
}

} // namespace

VsaResult func_wise_vsa(const FunctionCFG& fn, const SupersetListing& listing,
                        const RegionTable& regions,
                        const std::map<size_t, uint16_t>& callee_pops,
                        const VsaConfig& cfg) {
    VsaResult result;
    if (fn.blocks.empty())
        return result;
    Ctx ctx{regions, callee_pops, cfg};

    auto instr_at = [&](size_t off) -> const DecodedInstr& {
        return *listing.slots[off];
    };

    // Reverse postorder over the block graph.
    std::vector<size_t> rpo;
    {
        std::set<size_t> seen{fn.entry};
        std::vector<std::pair<size_t, size_t>> stack{{fn.entry, 0}};
        std::vector<size_t> post;
        while (!stack.empty()) {
            auto& [b, i] = stack.back();
            const BasicBlock* blk = fn.block_at(b);
            if (i < blk->succs.size()) {
                size_t succ = blk->succs[i++];
                if (seen.insert(succ).second)
                    stack.emplace_back(succ, 0);
            } else {
                post.push_back(b);
                stack.pop_back();
            }
        }
        rpo.assign(post.rbegin(), post.rend());
    }
    std::map<size_t, size_t> rpo_index;
    for (size_t i = 0; i < rpo.size(); ++i)
        rpo_index[rpo[i]] = i;

    std::map<size_t, AbsState> in_state;
    std::map<size_t, int> growth;
    std::set<size_t> work;

    in_state[fn.entry] = AbsState::function_entry();
    work.insert(rpo_index.at(fn.entry));

    auto merge_into = [&](size_t target, const AbsState& incoming) {
        auto idx = rpo_index.find(target);
        if (idx == rpo_index.end())
            return;
        AbsState& cur = in_state[target];
        if (!cur.reachable) {
            cur = incoming;
            work.insert(idx->second);
            return;
        }
        AbsState joined = join_states(cur, incoming, cfg.k_cap);
        if (joined == cur)
            return;
        if (++growth[target] > cfg.widen_after)
            widen_changed(cur, joined);
        cur = std::move(joined);
        work.insert(idx->second);
    };

    while (!work.empty()) {
        size_t idx = *work.begin();
        work.erase(work.begin());
        if (++result.visits > cfg.max_visits)
            throw NonTerminationError("value-set analysis did not converge in " +
                                      std::to_string(cfg.max_visits) +
                                      " block visits");
        size_t bstart = rpo[idx];
        const BasicBlock* blk = fn.block_at(bstart);
        AbsState st = in_state.at(bstart);
        for (size_t off : blk->instrs)
            transfer(st, instr_at(off), ctx);

        const DecodedInstr& last = instr_at(blk->instrs.back());
        size_t next_off = blk->instrs.back() + last.length;
        auto block_start_of = [&](size_t off) -> std::optional<size_t> {
            auto it = fn.block_of.find(off);
            if (it == fn.block_of.end() || it->second != off)
                return std::nullopt;
            return it->second;
        };

        if (last.is_cond_branch) {
            auto fact = st.cmp;
            st.cmp.reset();
            if (last.target_offset && *last.target_offset >= 0) {
                auto t = block_start_of(static_cast<size_t>(*last.target_offset));
                if (t) {
                    auto est = fact ? refine(st, *fact, last.cc, true, cfg.k_cap)
                                    : std::optional<AbsState>(st);
                    if (est)
                        merge_into(*t, *est);
                }
            }
            if (auto t = block_start_of(next_off)) {
                auto est = fact ? refine(st, *fact, last.cc, false, cfg.k_cap)
                                : std::optional<AbsState>(st);
                if (est)
                    merge_into(*t, *est);
            }
        } else if (last.is_branch && !last.is_call()) {
            if (last.target_offset && *last.target_offset >= 0)
                if (auto t = block_start_of(static_cast<size_t>(*last.target_offset)))
                    merge_into(*t, st);
        } else if (!last.is_ret()) {
            if (auto t = block_start_of(next_off))
                merge_into(*t, st);
        }
    }

    // One definitive pass over the converged in-states records pre-states.
    for (const auto& [bstart, st0] : in_state) {
        if (!st0.reachable)
            continue;
        result.block_in[bstart] = st0;
        AbsState st = st0;
        for (size_t off : fn.block_at(bstart)->instrs) {
            result.pre[off] = st;
            transfer(st, instr_at(off), ctx);
        }
    }
    return result;
}

std::string render_loc(const AbsLoc& loc) {
    switch (loc.base) {
    case AbsLoc::Base::StackInit:
        return "SI" + std::string(loc.off >= 0 ? "+" : "") +
               std::to_string(loc.off);
    case AbsLoc::Base::Global:
        return std::string(rgn_name(loc.region)) +
               (loc.off >= 0 ? "+" : "") + std::to_string(loc.off);
    case AbsLoc::Base::Const:
        return std::to_string(static_cast<uint32_t>(loc.off));
    }
    return "?";
}

std::string render_value(const AbsValue& v) {
    if (v.is_top())
        return "top";
    std::string out = "{";
    bool first = true;
    for (const auto& l : v.locs()) {
        if (!first)
            out += ",";
        out += render_loc(l);
        first = false;
    }
    return out + "}";
}

namespace {

// Maps one resolved location to a boundary key/offset pair.
std::optional<std::pair<std::string, int64_t>>
loc_to_boundary(const AbsLoc& l, const RegionTable& regions,
                const std::string& fn_name) {
    switch (l.base) {
    case AbsLoc::Base::StackInit:
        return std::make_pair(fn_name, l.off);
    case AbsLoc::Base::Global:
        return std::make_pair(std::string(rgn_name(l.region)), l.off);
    case AbsLoc::Base::Const: {
        uint32_t addr = static_cast<uint32_t>(l.off);
        auto r = regions.classify(addr);
        if (!r)
            return std::nullopt;
        return std::make_pair(std::string(rgn_name(*r)),
                              static_cast<int64_t>(addr) -
                                  *regions.start_of(*r));
    }
    }
    return std::nullopt;
}

} // namespace

MemBlockSet get_mem_blocks_from_disa(const FunctionCFG& fn,
                                     const SupersetListing& listing,
                                     const RegionTable& regions,
                                     const std::vector<size_t>& pred_offsets,
                                     const VsaResult& vsa) {
    MemBlockSet out;
    VsaConfig cfg;
    for (size_t off : pred_offsets) {
        auto pre = vsa.pre.find(off);
        if (pre == vsa.pre.end())
            continue;
        if (off >= listing.slots.size() || !listing.slots[off])
            continue;
        const MemOperand* mem = listing.slots[off]->mem_operand();
        if (!mem)
            continue;
        AbsValue addr = eval_mem_addr(pre->second, *mem, regions, cfg.k_cap);
        if (addr.is_top())
            continue;
        for (const auto& l : addr.locs())
            if (auto b = loc_to_boundary(l, regions, fn.name))
                out.boundaries[b->first].insert(b->second);
    }
    return out;
}

std::string render_mem_blocks(const MemBlockSet& blocks) {
    std::string out;
    for (const auto& [key, offs] : blocks.boundaries) {
        if (!out.empty())
            out += "; ";
        if (offs.size() == 1) {
            out += "(" + std::to_string(*offs.begin()) + ")@" + key;
            continue;
        }
        std::string body;
        for (int64_t o : offs) {
            if (!body.empty())
                body += ",";
            body += std::to_string(o);
        }
        out += "{" + body + "}@" + key;
    }
    return out;
}

BRelResult id_instr_touch_mem(const FunctionCFG& fn,
                              const SupersetListing& listing,
                              const RegionTable& regions,
                              const RawBlockSet& gt, const VsaResult& vsa) {
    BRelResult out;
    VsaConfig cfg;
    for (const auto& blk : fn.blocks) {
        for (size_t off : blk.instrs) {
            auto pre = vsa.pre.find(off);
            if (pre == vsa.pre.end())
                continue;
            const MemOperand* mem = listing.slots[off]->mem_operand();
            if (!mem)
                continue;
            AbsValue addr =
                eval_mem_addr(pre->second, *mem, regions, cfg.k_cap);
            if (addr.is_top())
                continue;
            for (const auto& l : addr.locs()) {
                auto b = loc_to_boundary(l, regions, fn.name);
                if (b && gt.is_boundary(b->first, b->second)) {
                    out.by_key[b->first].insert(off);
                    out.instrs.insert(off);
                }
            }
        }
    }
    return out;
}

} // namespace bindis
