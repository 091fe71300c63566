// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Test oracle for the value-set analysis: a seeded generator for small
// loop-free functions and a concrete interpreter executing them with a
// symbolic-free, fixed initial stack pointer. Abstract results must contain
// the concrete run.
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "bindis/cfg.hpp"
#include "bindis/decoder.hpp"
#include "bindis/regions.hpp"
#include "bindis/synth.hpp"

namespace bindis::oracle {

inline RegionTable oracle_regions() {
    RegionTable t;
    t.set(Rgn::Rodata, 0x804a000, 0x804a00f);
    t.set(Rgn::Data, 0x804a010, 0x804a02f);
    t.set(Rgn::Bss, 0x804a030, 0x804a03f);
    return t;
}

struct MiniFunc {
    ByteVec bytes;
    bool straight = true; // no branches at all
    SupersetListing listing;
    std::vector<size_t> true_offsets;
    FunctionCFG cfg;
};

// Emits a loop-free function of at most 20 supported instructions using only
// forward conditional branches placed directly after a cmp.
inline MiniFunc gen_vsa_func(uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto pick = [&](uint64_t n) { return static_cast<uint64_t>(rng() % n); };

    synth::Asm a;
    const std::vector<Reg> gp{Reg::Eax, Reg::Ecx, Reg::Edx,
                              Reg::Ebx, Reg::Esi, Reg::Edi};
    auto reg = [&]() { return gp[pick(gp.size())]; };

    MiniFunc out;
    bool ebp_frame = pick(3) != 0;
    int32_t locals = static_cast<int32_t>(8 * (1 + pick(3)));

    int budget = 20;
    if (ebp_frame) {
        a.push_r(Reg::Ebp);
        a.mov_rr(Reg::Ebp, Reg::Esp);
        a.sub_ri(Reg::Esp, locals);
        budget -= 5; // prologue + epilogue (leave; ret)
    } else {
        a.sub_ri(Reg::Esp, locals);
        budget -= 3; // prologue + epilogue (add; ret)
    }

    std::vector<int32_t> slots; // frame displacements already written
    auto frame_slot = [&](int32_t disp) {
        return ebp_frame ? synth::Mem::base_disp(Reg::Ebp, -disp)
                         : synth::Mem::base_disp(Reg::Esp, locals - disp);
    };
    auto fresh_disp = [&]() {
        return static_cast<int32_t>(4 + 4 * pick(locals / 4));
    };
    auto global_addr = [&]() {
        return 0x804a010u + static_cast<uint32_t>(4 * pick(8));
    };

    bool with_branch = pick(2) == 0;
    out.straight = !with_branch;
    int branch_at = with_branch ? static_cast<int>(2 + pick(3)) : -1;
    int emitted = 0;

    auto emit_simple = [&]() {
        switch (pick(11)) {
        case 0:
            a.mov_ri(reg(), pick(2) ? static_cast<int32_t>(pick(256))
                                    : static_cast<int32_t>(global_addr()));
            break;
        case 1: {
            int32_t d = fresh_disp();
            if (pick(2))
                a.mov_m_r(frame_slot(d), reg());
            else
                a.mov_m_i32(frame_slot(d), static_cast<int32_t>(pick(512)));
            slots.push_back(d);
            break;
        }
        case 2:
            if (!slots.empty()) {
                a.mov_r_m(reg(), frame_slot(slots[pick(slots.size())]));
                break;
            }
            [[fallthrough]];
        case 3:
            if (pick(2))
                a.add_ri(reg(), static_cast<int32_t>(1 + pick(32)));
            else
                a.sub_ri(reg(), static_cast<int32_t>(1 + pick(32)));
            break;
        case 4:
            if (pick(2))
                a.add_rr(reg(), reg());
            else
                a.sub_rr(reg(), reg());
            break;
        case 5:
            a.lea(reg(), synth::Mem::base_disp(reg(), static_cast<int32_t>(
                                                          pick(64)) -
                                                          32));
            break;
        case 6: {
            uint8_t scale = static_cast<uint8_t>(1u << pick(3));
            a.lea(reg(), synth::Mem::index_disp(reg(), scale, global_addr()));
            break;
        }
        case 7:
            if (pick(2))
                a.inc_r(reg());
            else
                a.dec_r(reg());
            break;
        case 8: {
            Reg r = reg();
            a.xor_rr(r, r);
            break;
        }
        case 9:
            a.imul_rr(reg(), reg());
            break;
        default:
            if (pick(2))
                a.mov_r_m(reg(), synth::Mem::at(global_addr()));
            else
                a.mov_m_r(synth::Mem::at(global_addr()), reg());
            break;
        }
        ++emitted;
    };

    static const Cond kCcs[] = {Cond::E,  Cond::Ne, Cond::L,  Cond::Le,
                                Cond::G,  Cond::Ge, Cond::B,  Cond::A,
                                Cond::Be, Cond::Ae};
    int body = static_cast<int>(4 + pick(5));
    int skip_budget = 0;
    for (int i = 0; i < body && emitted + skip_budget + 3 < budget; ++i) {
        if (i == branch_at) {
            a.cmp_ri(reg(), static_cast<int32_t>(pick(64)));
            a.jcc(kCcs[pick(10)], "skip");
            emitted += 2;
            skip_budget = static_cast<int>(1 + pick(2));
            for (int j = 0; j < skip_budget; ++j)
                emit_simple();
            a.label("skip");
            skip_budget = 0;
            continue;
        }
        emit_simple();
    }

    if (ebp_frame) {
        a.leave();
        a.ret();
    } else {
        a.add_ri(Reg::Esp, locals);
        a.ret();
    }

    out.bytes = a.take();
    ByteSpan span{out.bytes.data(), out.bytes.size()};
    out.listing = superset_disassemble(span);
    size_t off = 0;
    while (off < out.bytes.size()) {
        const auto& slot = out.listing.slots[off];
        if (!slot)
            throw std::logic_error("generated function must sweep cleanly");
        out.true_offsets.push_back(off);
        off += slot->length;
    }
    out.cfg = build_cfg(out.listing, {0}, out.true_offsets)[0];
    return out;
}

// Concrete machine: byte-granular memory with a deterministic fill pattern
// for never-written addresses, flags modeled for cmp only (the generator
// branches only straight after a cmp).
struct Interp {
    std::array<uint32_t, 8> regs{};
    std::map<uint32_t, uint8_t> mem;
    bool zf = false, sf = false, of = false, cf = false;

    static uint8_t fill_byte(uint32_t addr) {
        return static_cast<uint8_t>((addr * 2654435761u) >> 16);
    }

    uint32_t& reg(Reg r) { return regs[static_cast<size_t>(r)]; }

    uint8_t load8(uint32_t addr) {
        auto it = mem.find(addr);
        return it == mem.end() ? fill_byte(addr) : it->second;
    }
    uint32_t load(uint32_t addr, uint8_t width) {
        uint32_t v = 0;
        for (uint8_t i = 0; i < width; ++i)
            v |= static_cast<uint32_t>(load8(addr + i)) << (8 * i);
        return v;
    }
    void store(uint32_t addr, uint32_t v, uint8_t width) {
        for (uint8_t i = 0; i < width; ++i)
            mem[addr + i] = static_cast<uint8_t>((v >> (8 * i)) & 0xff);
    }

    uint32_t mem_addr(const MemOperand& m) {
        if (m.absolute)
            return static_cast<uint32_t>(m.disp);
        uint32_t v = m.base ? reg(*m.base) : 0;
        if (m.index)
            v += reg(*m.index) * m.scale;
        return v + static_cast<uint32_t>(m.disp);
    }

    uint32_t read_op(const DecodedInstr& ins, const Operand& op) {
        switch (op.kind) {
        case Operand::Kind::Imm:
            return static_cast<uint32_t>(op.imm);
        case Operand::Kind::Reg:
            if (op.reg_width == 4)
                return reg(op.reg);
            if (op.reg_width == 2)
                return reg(op.reg) & 0xffff;
            // 8-bit registers: 0..3 are low bytes, 4..7 the second byte.
            {
                auto i = static_cast<size_t>(op.reg);
                return i < 4 ? (regs[i] & 0xff) : ((regs[i - 4] >> 8) & 0xff);
            }
        case Operand::Kind::Mem:
            return load(mem_addr(op.mem), ins.width);
        }
        return 0;
    }

    void write_op(const DecodedInstr& ins, const Operand& op, uint32_t v) {
        if (op.kind == Operand::Kind::Mem) {
            store(mem_addr(op.mem), v, ins.width);
            return;
        }
        if (op.reg_width == 4) {
            reg(op.reg) = v;
        } else if (op.reg_width == 2) {
            reg(op.reg) = (reg(op.reg) & 0xffff0000u) | (v & 0xffff);
        } else {
            auto i = static_cast<size_t>(op.reg);
            if (i < 4)
                regs[i] = (regs[i] & 0xffffff00u) | (v & 0xff);
            else
                regs[i - 4] = (regs[i - 4] & 0xffff00ffu) | ((v & 0xff) << 8);
        }
    }

    void set_cmp_flags(uint32_t a, uint32_t b) {
        uint32_t r = a - b;
        zf = r == 0;
        sf = (r >> 31) != 0;
        of = (((a ^ b) & (a ^ r)) >> 31) != 0;
        cf = a < b;
    }

    bool cond_holds(Cond c) const {
        switch (c) {
        case Cond::E: return zf;
        case Cond::Ne: return !zf;
        case Cond::L: return sf != of;
        case Cond::Ge: return sf == of;
        case Cond::Le: return zf || sf != of;
        case Cond::G: return !zf && sf == of;
        case Cond::B: return cf;
        case Cond::Ae: return !cf;
        case Cond::Be: return cf || zf;
        case Cond::A: return !cf && !zf;
        case Cond::S: return sf;
        case Cond::Ns: return !sf;
        default:
            throw std::logic_error("unsupported condition in oracle");
        }
    }
};

inline uint32_t read(Interp& m, const DecodedInstr& ins, size_t op) {
    return m.read_op(ins, ins.ops[op]);
}

inline void write_dst(Interp& m, const DecodedInstr& ins, uint32_t v) {
    m.write_op(ins, ins.ops[0], v);
}

// Runs from `entry` until ret, invoking on_step(offset, machine) before each
// instruction. Calls are rejected: the generator never emits them.
inline void interpret(
    const SupersetListing& listing, size_t entry, Interp& m, size_t max_steps,
    const std::function<void(size_t, const Interp&)>& on_step) {
    size_t off = entry;
    for (size_t step = 0; step < max_steps; ++step) {
        const auto& slot = listing.slots[off];
        if (!slot)
            throw std::logic_error("oracle ran into an undecodable offset");
        const DecodedInstr& ins = *slot;
        on_step(off, m);
        size_t next = off + ins.length;
        switch (ins.mnemonic) {
        case Mnemonic::Mov:
            write_dst(m, ins, read(m, ins, 1));
            break;
        case Mnemonic::Lea:
            m.reg(ins.ops[0].reg) = m.mem_addr(ins.ops[1].mem);
            break;
        case Mnemonic::Push: {
            uint32_t v = m.read_op(ins, ins.ops[0]);
            m.reg(Reg::Esp) -= 4;
            m.store(m.reg(Reg::Esp), v, 4);
            break;
        }
        case Mnemonic::Pop: {
            uint32_t v = m.load(m.reg(Reg::Esp), 4);
            m.reg(Reg::Esp) += 4;
            m.write_op(ins, ins.ops[0], v);
            break;
        }
        case Mnemonic::Add:
            write_dst(m, ins, read(m, ins, 0) + read(m, ins, 1));
            break;
        case Mnemonic::Sub:
            write_dst(m, ins, read(m, ins, 0) - read(m, ins, 1));
            break;
        case Mnemonic::Inc:
            write_dst(m, ins, read(m, ins, 0) + 1);
            break;
        case Mnemonic::Dec:
            write_dst(m, ins, read(m, ins, 0) - 1);
            break;
        case Mnemonic::And:
            write_dst(m, ins, read(m, ins, 0) & read(m, ins, 1));
            break;
        case Mnemonic::Or:
            write_dst(m, ins, read(m, ins, 0) | read(m, ins, 1));
            break;
        case Mnemonic::Xor:
            write_dst(m, ins, read(m, ins, 0) ^ read(m, ins, 1));
            break;
        case Mnemonic::Imul: {
            uint32_t a = ins.ops.size() == 3 ? m.read_op(ins, ins.ops[1])
                                             : m.read_op(ins, ins.ops[0]);
            uint32_t b = m.read_op(ins, ins.ops.back());
            m.write_op(ins, ins.ops[0], a * b);
            break;
        }
        case Mnemonic::Cmp:
            m.set_cmp_flags(m.read_op(ins, ins.ops[0]),
                            m.read_op(ins, ins.ops[1]));
            break;
        case Mnemonic::Test: {
            uint32_t r = m.read_op(ins, ins.ops[0]) & m.read_op(ins, ins.ops[1]);
            m.zf = r == 0;
            m.sf = (r >> 31) != 0;
            m.of = m.cf = false;
            break;
        }
        case Mnemonic::Jmp:
            next = static_cast<size_t>(*ins.target_offset);
            break;
        case Mnemonic::Jcc:
            if (m.cond_holds(ins.cc))
                next = static_cast<size_t>(*ins.target_offset);
            break;
        case Mnemonic::Leave:
            m.reg(Reg::Esp) = m.reg(Reg::Ebp);
            m.reg(Reg::Ebp) = m.load(m.reg(Reg::Esp), 4);
            m.reg(Reg::Esp) += 4;
            break;
        case Mnemonic::Ret:
            return;
        case Mnemonic::Nop:
        case Mnemonic::Endbr32:
        case Mnemonic::Endbr64:
            break;
        case Mnemonic::Movzx:
            m.write_op(ins, ins.ops[0], m.read_op(ins, ins.ops[1]));
            break;
        default:
            throw std::logic_error("oracle does not model this instruction");
        }
        off = next;
    }
    throw std::logic_error("oracle exceeded its step budget");
}

} // namespace bindis::oracle
