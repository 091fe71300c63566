// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bindis/common.hpp"

namespace bindis {

enum class Reg : uint8_t {
    Eax = 0, Ecx, Edx, Ebx, Esp, Ebp, Esi, Edi,
};

inline const char* reg32_name(Reg r) {
    static const char* names[8] = {"eax", "ecx", "edx", "ebx",
                                   "esp", "ebp", "esi", "edi"};
    return names[static_cast<uint8_t>(r) & 7];
}

enum class Mnemonic : uint8_t {
    Mov, Lea, Push, Pop,
    Add, Sub, And, Or, Xor, Cmp, Test,
    Inc, Dec, Imul,
    Jcc, Jmp, Call, Ret, Leave,
    Setcc, Movzx, Movsx,
    Nop, Endbr32, Endbr64,
};

const char* mnemonic_name(Mnemonic m);

// Condition codes in Intel encoding order (low nibble of jcc/setcc).
enum class Cond : uint8_t {
    O = 0, No, B, Ae, E, Ne, Be, A, S, Ns, P, Np, L, Ge, Le, G,
    None = 16,
};

const char* cond_name(Cond c);

// Memory addressing expression as encoded. `absolute` means no base and no
// index: the displacement alone is the address.
struct MemOperand {
    std::optional<Reg> base;
    std::optional<Reg> index;
    uint8_t scale = 1;
    int32_t disp = 0;
    bool has_disp = false;
    uint8_t disp_size = 0; // 0, 1, 2 or 4 displacement bytes
    bool absolute = false;
    bool addr16 = false; // decoded under the 0x67 prefix
};

struct Operand {
    enum class Kind : uint8_t { Reg, Mem, Imm };
    Kind kind = Kind::Imm;
    Reg reg = Reg::Eax;
    uint8_t reg_width = 4; // 1, 2 or 4 bytes for Kind::Reg
    MemOperand mem;
    int64_t imm = 0;

    static Operand make_reg(Reg r, uint8_t width) {
        Operand o;
        o.kind = Kind::Reg;
        o.reg = r;
        o.reg_width = width;
        return o;
    }
    static Operand make_mem(const MemOperand& m) {
        Operand o;
        o.kind = Kind::Mem;
        o.mem = m;
        return o;
    }
    static Operand make_imm(int64_t v) {
        Operand o;
        o.kind = Kind::Imm;
        o.imm = v;
        return o;
    }
};

constexpr uint16_t kFieldAbsent = 256;

struct DecodedInstr {
    uint64_t offset = 0;
    uint8_t length = 0;

    // Raw encoding fields used for tokenisation.
    uint16_t opcode_id = 0;           // 0..1793
    uint16_t modrm_id = kFieldAbsent; // 0..255, 256 when absent
    uint16_t sib_id = kFieldAbsent;   // 0..255, 256 when absent

    Mnemonic mnemonic = Mnemonic::Nop;
    Cond cc = Cond::None;
    uint8_t width = 4; // data width of the operation in bytes
    std::vector<Operand> ops;

    bool is_branch = false;
    bool is_cond_branch = false;
    // Byte offset of the target for direct relative branches. May point
    // outside the decoded buffer.
    std::optional<int64_t> target_offset;

    const MemOperand* mem_operand() const {
        for (const auto& op : ops)
            if (op.kind == Operand::Kind::Mem)
                return &op.mem;
        return nullptr;
    }
    bool has_mem() const { return mem_operand() != nullptr; }
    bool is_mem_access() const { return mem_operand() != nullptr; }
    // Raw encoded displacement; absolute forms widen to the unsigned address.
    std::optional<int64_t> displacement() const {
        const MemOperand* m = mem_operand();
        if (!m || !m->has_disp)
            return std::nullopt;
        if (m->absolute)
            return static_cast<int64_t>(static_cast<uint32_t>(m->disp));
        return static_cast<int64_t>(m->disp);
    }
    bool is_call() const { return mnemonic == Mnemonic::Call; }
    bool is_ret() const { return mnemonic == Mnemonic::Ret; }
    bool is_nop() const {
        return mnemonic == Mnemonic::Nop || mnemonic == Mnemonic::Endbr32 ||
               mnemonic == Mnemonic::Endbr64;
    }
    // Control flow never continues past an unconditional jmp or ret.
    bool falls_through() const {
        return !(mnemonic == Mnemonic::Ret ||
                 (mnemonic == Mnemonic::Jmp));
    }
};

std::string render_instr(const DecodedInstr& ins);

// Decode the instruction starting at `offset`. Returns nullopt when the
// bytes do not form a supported instruction.
std::optional<DecodedInstr> decode_at(ByteSpan bytes, uint64_t offset);

// One decode slot per byte offset. A listing over S bytes always has S
// slots; failed offsets are nullopt.
struct SupersetListing {
    std::vector<std::optional<DecodedInstr>> slots;
    size_t num_instrs = 0;
    size_t num_failures = 0;

    size_t size() const { return slots.size(); }
    const DecodedInstr* at(uint64_t offset) const {
        if (offset >= slots.size() || !slots[offset])
            return nullptr;
        return &*slots[offset];
    }
};

SupersetListing superset_disassemble(ByteSpan bytes);

} // namespace bindis
