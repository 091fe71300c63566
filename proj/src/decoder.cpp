// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
#include "bindis/decoder.hpp"

#include <array>
#include <sstream>

namespace bindis {

namespace {

constexpr size_t kMaxInstrLen = 15;

struct Cursor {
    ByteSpan bytes;
    size_t pos = 0;

    std::optional<uint8_t> peek() const {
        if (pos >= bytes.size())
            return std::nullopt;
        return bytes[pos];
    }
    std::optional<uint8_t> take() {
        if (pos >= bytes.size())
            return std::nullopt;
        return bytes[pos++];
    }
    std::optional<uint16_t> take_u16() {
        if (pos + 2 > bytes.size())
            return std::nullopt;
        uint16_t v = static_cast<uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
        pos += 2;
        return v;
    }
    std::optional<uint32_t> take_u32() {
        if (pos + 4 > bytes.size())
            return std::nullopt;
        uint32_t v = static_cast<uint32_t>(bytes[pos]) |
                     (static_cast<uint32_t>(bytes[pos + 1]) << 8) |
                     (static_cast<uint32_t>(bytes[pos + 2]) << 16) |
                     (static_cast<uint32_t>(bytes[pos + 3]) << 24);
        pos += 4;
        return v;
    }
};

// One-byte opcodes whose ModRM reg field selects the operation. The vocab
// reserves eight ids per group, indexed by position in this list.
constexpr std::array<uint8_t, 10> kGroupOpcodes = {
    0x80, 0x81, 0x83, 0x8F, 0xC6, 0xC7, 0xF6, 0xF7, 0xFE, 0xFF};

std::optional<int> group_index(uint8_t op) {
    for (size_t i = 0; i < kGroupOpcodes.size(); ++i)
        if (kGroupOpcodes[i] == op)
            return static_cast<int>(i);
    return std::nullopt;
}

struct ModRm {
    uint8_t modrm = 0;
    std::optional<uint8_t> sib;
    uint8_t reg = 0;
    bool rm_is_reg = false;
    Reg rm_reg = Reg::Eax;
    MemOperand mem;
};

std::optional<ModRm> parse_modrm(Cursor& c, bool addr16) {
    auto mb = c.take();
    if (!mb)
        return std::nullopt;
    ModRm r;
    r.modrm = *mb;
    uint8_t mod = *mb >> 6;
    r.reg = (*mb >> 3) & 7;
    uint8_t rm = *mb & 7;

    if (mod == 3) {
        r.rm_is_reg = true;
        r.rm_reg = static_cast<Reg>(rm);
        return r;
    }

    if (addr16) {
        r.mem.addr16 = true;
        if (mod == 0 && rm == 6) {
            auto d = c.take_u16();
            if (!d)
                return std::nullopt;
            r.mem.disp = static_cast<int32_t>(*d);
            r.mem.has_disp = true;
            r.mem.disp_size = 2;
            r.mem.absolute = true;
        } else if (mod == 1) {
            auto d = c.take();
            if (!d)
                return std::nullopt;
            r.mem.disp = static_cast<int8_t>(*d);
            r.mem.has_disp = true;
            r.mem.disp_size = 1;
        } else if (mod == 2) {
            auto d = c.take_u16();
            if (!d)
                return std::nullopt;
            r.mem.disp = static_cast<int16_t>(*d);
            r.mem.has_disp = true;
            r.mem.disp_size = 2;
        }
        return r;
    }

    bool need_disp32 = false;
    if (rm == 4) {
        auto sb = c.take();
        if (!sb)
            return std::nullopt;
        r.sib = *sb;
        uint8_t ss = *sb >> 6;
        uint8_t idx = (*sb >> 3) & 7;
        uint8_t base = *sb & 7;
        if (idx != 4) {
            r.mem.index = static_cast<Reg>(idx);
            r.mem.scale = static_cast<uint8_t>(1u << ss);
        }
        if (base == 5 && mod == 0)
            need_disp32 = true;
        else
            r.mem.base = static_cast<Reg>(base);
    } else if (rm == 5 && mod == 0) {
        need_disp32 = true;
    } else {
        r.mem.base = static_cast<Reg>(rm);
    }

    if (mod == 1) {
        auto d = c.take();
        if (!d)
            return std::nullopt;
        r.mem.disp = static_cast<int8_t>(*d);
        r.mem.has_disp = true;
        r.mem.disp_size = 1;
    } else if (mod == 2 || need_disp32) {
        auto d = c.take_u32();
        if (!d)
            return std::nullopt;
        r.mem.disp = static_cast<int32_t>(*d);
        r.mem.has_disp = true;
        r.mem.disp_size = 4;
    }
    r.mem.absolute = !r.mem.base && !r.mem.index && r.mem.has_disp;
    return r;
}

void apply_modrm_ids(DecodedInstr& ins, const ModRm& m) {
    ins.modrm_id = m.modrm;
    if (m.sib)
        ins.sib_id = *m.sib;
}

Operand rm_operand(const ModRm& m, uint8_t width) {
    if (m.rm_is_reg)
        return Operand::make_reg(m.rm_reg, width);
    return Operand::make_mem(m.mem);
}

} // namespace

const char* mnemonic_name(Mnemonic m) {
    switch (m) {
    case Mnemonic::Mov: return "mov";
    case Mnemonic::Lea: return "lea";
    case Mnemonic::Push: return "push";
    case Mnemonic::Pop: return "pop";
    case Mnemonic::Add: return "add";
    case Mnemonic::Sub: return "sub";
    case Mnemonic::And: return "and";
    case Mnemonic::Or: return "or";
    case Mnemonic::Xor: return "xor";
    case Mnemonic::Cmp: return "cmp";
    case Mnemonic::Test: return "test";
    case Mnemonic::Inc: return "inc";
    case Mnemonic::Dec: return "dec";
    case Mnemonic::Imul: return "imul";
    case Mnemonic::Jcc: return "j";
    case Mnemonic::Jmp: return "jmp";
    case Mnemonic::Call: return "call";
    case Mnemonic::Ret: return "ret";
    case Mnemonic::Leave: return "leave";
    case Mnemonic::Setcc: return "set";
    case Mnemonic::Movzx: return "movzx";
    case Mnemonic::Movsx: return "movsx";
    case Mnemonic::Nop: return "nop";
    case Mnemonic::Endbr32: return "endbr32";
    case Mnemonic::Endbr64: return "endbr64";
    }
    return "?";
}

const char* cond_name(Cond c) {
    static const char* names[16] = {"o",  "no", "b",  "ae", "e",  "ne",
                                    "be", "a",  "s",  "ns", "p",  "np",
                                    "l",  "ge", "le", "g"};
    if (c == Cond::None)
        return "";
    return names[static_cast<uint8_t>(c)];
}

std::string render_instr(const DecodedInstr& ins) {
    std::ostringstream os;
    os << mnemonic_name(ins.mnemonic);
    if (ins.cc != Cond::None)
        os << cond_name(ins.cc);
    static const char* reg8[8] = {"al", "cl", "dl", "bl",
                                  "ah", "ch", "dh", "bh"};
    static const char* reg16[8] = {"ax", "cx", "dx", "bx",
                                   "sp", "bp", "si", "di"};
    bool first = true;
    for (const auto& op : ins.ops) {
        os << (first ? " " : ", ");
        first = false;
        switch (op.kind) {
        case Operand::Kind::Reg: {
            uint8_t id = static_cast<uint8_t>(op.reg) & 7;
            if (op.reg_width == 1)
                os << reg8[id];
            else if (op.reg_width == 2)
                os << reg16[id];
            else
                os << reg32_name(op.reg);
            break;
        }
        case Operand::Kind::Mem: {
            os << "[";
            bool inner = false;
            if (op.mem.base) {
                os << reg32_name(*op.mem.base);
                inner = true;
            }
            if (op.mem.index) {
                if (inner)
                    os << "+";
                os << reg32_name(*op.mem.index) << "*"
                   << static_cast<int>(op.mem.scale);
                inner = true;
            }
            if (op.mem.has_disp || !inner) {
                if (op.mem.absolute || !inner) {
                    if (inner)
                        os << "+";
                    os << hex_addr(static_cast<uint32_t>(op.mem.disp));
                } else if (op.mem.disp < 0) {
                    os << "-" << hex_addr(static_cast<uint32_t>(-static_cast<int64_t>(op.mem.disp)));
                } else {
                    os << "+" << hex_addr(static_cast<uint32_t>(op.mem.disp));
                }
            }
            os << "]";
            break;
        }
        case Operand::Kind::Imm:
            if (op.imm < 0)
                os << "-" << hex_addr(static_cast<uint64_t>(-op.imm));
            else
                os << hex_addr(static_cast<uint64_t>(op.imm));
            break;
        }
    }
    if (ins.target_offset)
        os << " -> " << *ins.target_offset;
    return os.str();
}

std::optional<DecodedInstr> decode_at(ByteSpan bytes, uint64_t offset) {
    if (offset >= bytes.size())
        return std::nullopt;
    Cursor c{bytes, static_cast<size_t>(offset)};

    bool opsize16 = false;
    bool addr16 = false;
    bool rep_f3 = false;
    for (;;) {
        auto b = c.peek();
        if (!b)
            return std::nullopt;
        bool is_prefix = true;
        switch (*b) {
        case 0x66: opsize16 = true; break;
        case 0x67: addr16 = true; break;
        case 0xF3: rep_f3 = true; break;
        case 0xF0:
        case 0xF2:
        case 0x2E:
        case 0x36:
        case 0x3E:
        case 0x26:
        case 0x64:
        case 0x65:
            break;
        default:
            is_prefix = false;
            break;
        }
        if (!is_prefix)
            break;
        c.take();
        if (c.pos - offset > kMaxInstrLen)
            return std::nullopt;
    }

    const uint8_t wwidth = opsize16 ? 2 : 4;

    DecodedInstr ins;
    ins.offset = offset;

    auto finish = [&]() -> std::optional<DecodedInstr> {
        size_t len = c.pos - offset;
        if (len > kMaxInstrLen)
            return std::nullopt;
        ins.length = static_cast<uint8_t>(len);
        return ins;
    };

    auto take_imm = [&](uint8_t size) -> std::optional<int64_t> {
        if (size == 1) {
            auto v = c.take();
            if (!v)
                return std::nullopt;
            return static_cast<int8_t>(*v);
        }
        if (size == 2) {
            auto v = c.take_u16();
            if (!v)
                return std::nullopt;
            return static_cast<int16_t>(*v);
        }
        auto v = c.take_u32();
        if (!v)
            return std::nullopt;
        return static_cast<int32_t>(*v);
    };

    auto opb = c.take();
    if (!opb)
        return std::nullopt;
    uint8_t op = *opb;

    // Relative branch helper: target is relative to the end of the
    // instruction, which is known only after taking the immediate.
    auto rel_branch = [&](Mnemonic m, Cond cc, uint8_t rel_size)
        -> std::optional<DecodedInstr> {
        auto rel = take_imm(rel_size);
        if (!rel)
            return std::nullopt;
        ins.mnemonic = m;
        ins.cc = cc;
        ins.is_branch = true;
        ins.is_cond_branch = (m == Mnemonic::Jcc);
        ins.target_offset = static_cast<int64_t>(c.pos) + *rel;
        return finish();
    };

    // add/or/and/sub/xor/cmp share one opcode pattern (base+0 .. base+5).
    auto alu_form = [&](Mnemonic m, uint8_t form)
        -> std::optional<DecodedInstr> {
        ins.mnemonic = m;
        switch (form) {
        case 0:
        case 1:
        case 2:
        case 3: {
            uint8_t w = (form & 1) ? wwidth : 1;
            ins.width = w;
            auto mr = parse_modrm(c, addr16);
            if (!mr)
                return std::nullopt;
            apply_modrm_ids(ins, *mr);
            Operand rm = rm_operand(*mr, w);
            Operand rg = Operand::make_reg(static_cast<Reg>(mr->reg), w);
            if (form < 2)
                ins.ops = {rm, rg};
            else
                ins.ops = {rg, rm};
            return finish();
        }
        case 4: {
            ins.width = 1;
            auto imm = take_imm(1);
            if (!imm)
                return std::nullopt;
            ins.ops = {Operand::make_reg(Reg::Eax, 1),
                       Operand::make_imm(*imm)};
            return finish();
        }
        case 5: {
            ins.width = wwidth;
            auto imm = take_imm(wwidth);
            if (!imm)
                return std::nullopt;
            ins.ops = {Operand::make_reg(Reg::Eax, wwidth),
                       Operand::make_imm(*imm)};
            return finish();
        }
        }
        return std::nullopt;
    };

    auto group_id = [&](uint8_t opcode, uint8_t reg) -> uint16_t {
        auto gi = group_index(opcode);
        return static_cast<uint16_t>(512 + *gi * 8 + reg);
    };

    switch (op) {
    case 0x00: case 0x01: case 0x02: case 0x03: case 0x04: case 0x05:
        ins.opcode_id = op;
        return alu_form(Mnemonic::Add, op - 0x00);
    case 0x08: case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
        ins.opcode_id = op;
        return alu_form(Mnemonic::Or, op - 0x08);
    case 0x20: case 0x21: case 0x22: case 0x23: case 0x24: case 0x25:
        ins.opcode_id = op;
        return alu_form(Mnemonic::And, op - 0x20);
    case 0x28: case 0x29: case 0x2A: case 0x2B: case 0x2C: case 0x2D:
        ins.opcode_id = op;
        return alu_form(Mnemonic::Sub, op - 0x28);
    case 0x30: case 0x31: case 0x32: case 0x33: case 0x34: case 0x35:
        ins.opcode_id = op;
        return alu_form(Mnemonic::Xor, op - 0x30);
    case 0x38: case 0x39: case 0x3A: case 0x3B: case 0x3C: case 0x3D:
        ins.opcode_id = op;
        return alu_form(Mnemonic::Cmp, op - 0x38);

    case 0x40: case 0x41: case 0x42: case 0x43:
    case 0x44: case 0x45: case 0x46: case 0x47:
        ins.opcode_id = op;
        ins.mnemonic = Mnemonic::Inc;
        ins.width = wwidth;
        ins.ops = {Operand::make_reg(static_cast<Reg>(op & 7), wwidth)};
        return finish();
    case 0x48: case 0x49: case 0x4A: case 0x4B:
    case 0x4C: case 0x4D: case 0x4E: case 0x4F:
        ins.opcode_id = op;
        ins.mnemonic = Mnemonic::Dec;
        ins.width = wwidth;
        ins.ops = {Operand::make_reg(static_cast<Reg>(op & 7), wwidth)};
        return finish();

    case 0x50: case 0x51: case 0x52: case 0x53:
    case 0x54: case 0x55: case 0x56: case 0x57:
        ins.opcode_id = op;
        ins.mnemonic = Mnemonic::Push;
        ins.ops = {Operand::make_reg(static_cast<Reg>(op & 7), 4)};
        return finish();
    case 0x58: case 0x59: case 0x5A: case 0x5B:
    case 0x5C: case 0x5D: case 0x5E: case 0x5F:
        ins.opcode_id = op;
        ins.mnemonic = Mnemonic::Pop;
        ins.ops = {Operand::make_reg(static_cast<Reg>(op & 7), 4)};
        return finish();

    case 0x68: {
        ins.opcode_id = op;
        ins.mnemonic = Mnemonic::Push;
        auto imm = take_imm(wwidth);
        if (!imm)
            return std::nullopt;
        ins.ops = {Operand::make_imm(*imm)};
        return finish();
    }
    case 0x6A: {
        ins.opcode_id = op;
        ins.mnemonic = Mnemonic::Push;
        auto imm = take_imm(1);
        if (!imm)
            return std::nullopt;
        ins.ops = {Operand::make_imm(*imm)};
        return finish();
    }
    case 0x69:
    case 0x6B: {
        ins.opcode_id = op;
        ins.mnemonic = Mnemonic::Imul;
        ins.width = wwidth;
        auto mr = parse_modrm(c, addr16);
        if (!mr)
            return std::nullopt;
        apply_modrm_ids(ins, *mr);
        auto imm = take_imm(op == 0x69 ? wwidth : 1);
        if (!imm)
            return std::nullopt;
        ins.ops = {Operand::make_reg(static_cast<Reg>(mr->reg), wwidth),
                   rm_operand(*mr, wwidth), Operand::make_imm(*imm)};
        return finish();
    }

    case 0x70: case 0x71: case 0x72: case 0x73:
    case 0x74: case 0x75: case 0x76: case 0x77:
    case 0x78: case 0x79: case 0x7A: case 0x7B:
    case 0x7C: case 0x7D: case 0x7E: case 0x7F:
        ins.opcode_id = op;
        return rel_branch(Mnemonic::Jcc, static_cast<Cond>(op & 0xF), 1);

    case 0x80:
    case 0x81:
    case 0x83: {
        auto mr = parse_modrm(c, addr16);
        if (!mr)
            return std::nullopt;
        static const Mnemonic grp1[8] = {
            Mnemonic::Add, Mnemonic::Or,  Mnemonic::Nop, Mnemonic::Nop,
            Mnemonic::And, Mnemonic::Sub, Mnemonic::Xor, Mnemonic::Cmp};
        if (mr->reg == 2 || mr->reg == 3) // adc/sbb unsupported
            return std::nullopt;
        ins.mnemonic = grp1[mr->reg];
        ins.opcode_id = group_id(op, mr->reg);
        apply_modrm_ids(ins, *mr);
        uint8_t w = (op == 0x80) ? 1 : wwidth;
        ins.width = w;
        uint8_t imm_size = (op == 0x81) ? wwidth : 1;
        auto imm = take_imm(imm_size);
        if (!imm)
            return std::nullopt;
        ins.ops = {rm_operand(*mr, w), Operand::make_imm(*imm)};
        return finish();
    }

    case 0x84:
    case 0x85: {
        ins.opcode_id = op;
        ins.mnemonic = Mnemonic::Test;
        uint8_t w = (op == 0x84) ? 1 : wwidth;
        ins.width = w;
        auto mr = parse_modrm(c, addr16);
        if (!mr)
            return std::nullopt;
        apply_modrm_ids(ins, *mr);
        ins.ops = {rm_operand(*mr, w),
                   Operand::make_reg(static_cast<Reg>(mr->reg), w)};
        return finish();
    }

    case 0x88: case 0x89: case 0x8A: case 0x8B:
        ins.opcode_id = op;
        return alu_form(Mnemonic::Mov, op - 0x88);

    case 0x8D: {
        ins.opcode_id = op;
        ins.mnemonic = Mnemonic::Lea;
        ins.width = wwidth;
        auto mr = parse_modrm(c, addr16);
        if (!mr || mr->rm_is_reg)
            return std::nullopt;
        apply_modrm_ids(ins, *mr);
        ins.ops = {Operand::make_reg(static_cast<Reg>(mr->reg), wwidth),
                   Operand::make_mem(mr->mem)};
        return finish();
    }

    case 0x8F: {
        auto mr = parse_modrm(c, addr16);
        if (!mr || mr->reg != 0)
            return std::nullopt;
        ins.opcode_id = group_id(op, mr->reg);
        apply_modrm_ids(ins, *mr);
        ins.mnemonic = Mnemonic::Pop;
        ins.ops = {rm_operand(*mr, 4)};
        return finish();
    }

    case 0x90:
        ins.opcode_id = op;
        ins.mnemonic = Mnemonic::Nop;
        return finish();

    case 0xA0: case 0xA1: case 0xA2: case 0xA3: {
        ins.opcode_id = op;
        ins.mnemonic = Mnemonic::Mov;
        uint8_t w = (op & 1) ? wwidth : 1;
        ins.width = w;
        uint8_t asize = addr16 ? 2 : 4;
        auto addr = take_imm(asize);
        if (!addr)
            return std::nullopt;
        MemOperand m;
        m.disp = static_cast<int32_t>(*addr);
        m.has_disp = true;
        m.disp_size = asize;
        m.absolute = true;
        m.addr16 = addr16;
        Operand acc = Operand::make_reg(Reg::Eax, w);
        if (op < 0xA2)
            ins.ops = {acc, Operand::make_mem(m)};
        else
            ins.ops = {Operand::make_mem(m), acc};
        return finish();
    }

    case 0xA8:
    case 0xA9: {
        ins.opcode_id = op;
        ins.mnemonic = Mnemonic::Test;
        uint8_t w = (op == 0xA8) ? 1 : wwidth;
        ins.width = w;
        auto imm = take_imm(w == 1 ? 1 : wwidth);
        if (!imm)
            return std::nullopt;
        ins.ops = {Operand::make_reg(Reg::Eax, w), Operand::make_imm(*imm)};
        return finish();
    }

    case 0xB0: case 0xB1: case 0xB2: case 0xB3:
    case 0xB4: case 0xB5: case 0xB6: case 0xB7: {
        ins.opcode_id = op;
        ins.mnemonic = Mnemonic::Mov;
        ins.width = 1;
        auto imm = take_imm(1);
        if (!imm)
            return std::nullopt;
        ins.ops = {Operand::make_reg(static_cast<Reg>(op & 7), 1),
                   Operand::make_imm(*imm)};
        return finish();
    }
    case 0xB8: case 0xB9: case 0xBA: case 0xBB:
    case 0xBC: case 0xBD: case 0xBE: case 0xBF: {
        ins.opcode_id = op;
        ins.mnemonic = Mnemonic::Mov;
        ins.width = wwidth;
        auto imm = take_imm(wwidth);
        if (!imm)
            return std::nullopt;
        ins.ops = {Operand::make_reg(static_cast<Reg>(op & 7), wwidth),
                   Operand::make_imm(*imm)};
        return finish();
    }

    case 0xC2: {
        ins.opcode_id = op;
        ins.mnemonic = Mnemonic::Ret;
        ins.is_branch = true;
        auto imm = take_imm(2);
        if (!imm)
            return std::nullopt;
        ins.ops = {Operand::make_imm(*imm)};
        return finish();
    }
    case 0xC3:
        ins.opcode_id = op;
        ins.mnemonic = Mnemonic::Ret;
        ins.is_branch = true;
        return finish();

    case 0xC6:
    case 0xC7: {
        auto mr = parse_modrm(c, addr16);
        if (!mr || mr->reg != 0)
            return std::nullopt;
        ins.opcode_id = group_id(op, mr->reg);
        apply_modrm_ids(ins, *mr);
        ins.mnemonic = Mnemonic::Mov;
        uint8_t w = (op == 0xC6) ? 1 : wwidth;
        ins.width = w;
        auto imm = take_imm(w == 1 ? 1 : wwidth);
        if (!imm)
            return std::nullopt;
        ins.ops = {rm_operand(*mr, w), Operand::make_imm(*imm)};
        return finish();
    }

    case 0xC9:
        ins.opcode_id = op;
        ins.mnemonic = Mnemonic::Leave;
        return finish();

    case 0xE8:
        ins.opcode_id = op;
        return rel_branch(Mnemonic::Call, Cond::None, opsize16 ? 2 : 4);
    case 0xE9:
        ins.opcode_id = op;
        return rel_branch(Mnemonic::Jmp, Cond::None, opsize16 ? 2 : 4);
    case 0xEB:
        ins.opcode_id = op;
        return rel_branch(Mnemonic::Jmp, Cond::None, 1);

    case 0xF6:
    case 0xF7: {
        auto mr = parse_modrm(c, addr16);
        if (!mr)
            return std::nullopt;
        uint8_t w = (op == 0xF6) ? 1 : wwidth;
        ins.width = w;
        if (mr->reg == 0 || mr->reg == 1) {
            ins.mnemonic = Mnemonic::Test;
            ins.opcode_id = group_id(op, mr->reg);
            apply_modrm_ids(ins, *mr);
            auto imm = take_imm(w == 1 ? 1 : wwidth);
            if (!imm)
                return std::nullopt;
            ins.ops = {rm_operand(*mr, w), Operand::make_imm(*imm)};
            return finish();
        }
        if (mr->reg == 5) {
            ins.mnemonic = Mnemonic::Imul;
            ins.opcode_id = group_id(op, mr->reg);
            apply_modrm_ids(ins, *mr);
            ins.ops = {rm_operand(*mr, w)};
            return finish();
        }
        return std::nullopt;
    }

    case 0xFE:
    case 0xFF: {
        auto mr = parse_modrm(c, addr16);
        if (!mr)
            return std::nullopt;
        uint8_t w = (op == 0xFE) ? 1 : wwidth;
        if (mr->reg == 0 || mr->reg == 1) {
            ins.mnemonic = (mr->reg == 0) ? Mnemonic::Inc : Mnemonic::Dec;
            ins.opcode_id = group_id(op, mr->reg);
            apply_modrm_ids(ins, *mr);
            ins.width = w;
            ins.ops = {rm_operand(*mr, w)};
            return finish();
        }
        if (op == 0xFF && mr->reg == 2) {
            ins.mnemonic = Mnemonic::Call;
            ins.opcode_id = group_id(op, mr->reg);
            apply_modrm_ids(ins, *mr);
            ins.is_branch = true;
            ins.ops = {rm_operand(*mr, 4)};
            return finish();
        }
        if (op == 0xFF && mr->reg == 4) {
            ins.mnemonic = Mnemonic::Jmp;
            ins.opcode_id = group_id(op, mr->reg);
            apply_modrm_ids(ins, *mr);
            ins.is_branch = true;
            ins.ops = {rm_operand(*mr, 4)};
            return finish();
        }
        if (op == 0xFF && mr->reg == 6) {
            ins.mnemonic = Mnemonic::Push;
            ins.opcode_id = group_id(op, mr->reg);
            apply_modrm_ids(ins, *mr);
            ins.ops = {rm_operand(*mr, 4)};
            return finish();
        }
        return std::nullopt;
    }

    case 0x0F: {
        auto op2b = c.take();
        if (!op2b)
            return std::nullopt;
        uint8_t op2 = *op2b;
        ins.opcode_id = static_cast<uint16_t>(256 + op2);

        if (op2 == 0x1E) {
            if (!rep_f3)
                return std::nullopt;
            auto mb = c.take();
            if (!mb)
                return std::nullopt;
            if (*mb == 0xFB) {
                ins.opcode_id = 1536;
                ins.mnemonic = Mnemonic::Endbr32;
                return finish();
            }
            if (*mb == 0xFA) {
                ins.opcode_id = 1537;
                ins.mnemonic = Mnemonic::Endbr64;
                return finish();
            }
            return std::nullopt;
        }

        if (op2 == 0x1F) {
            auto mr = parse_modrm(c, addr16);
            if (!mr || mr->reg != 0)
                return std::nullopt;
            apply_modrm_ids(ins, *mr);
            ins.mnemonic = Mnemonic::Nop;
            return finish();
        }

        if (op2 >= 0x80 && op2 <= 0x8F)
            return rel_branch(Mnemonic::Jcc, static_cast<Cond>(op2 & 0xF),
                              opsize16 ? 2 : 4);

        if (op2 >= 0x90 && op2 <= 0x9F) {
            auto mr = parse_modrm(c, addr16);
            if (!mr)
                return std::nullopt;
            apply_modrm_ids(ins, *mr);
            ins.mnemonic = Mnemonic::Setcc;
            ins.cc = static_cast<Cond>(op2 & 0xF);
            ins.width = 1;
            ins.ops = {rm_operand(*mr, 1)};
            return finish();
        }

        if (op2 == 0xAF) {
            auto mr = parse_modrm(c, addr16);
            if (!mr)
                return std::nullopt;
            apply_modrm_ids(ins, *mr);
            ins.mnemonic = Mnemonic::Imul;
            ins.width = wwidth;
            ins.ops = {Operand::make_reg(static_cast<Reg>(mr->reg), wwidth),
                       rm_operand(*mr, wwidth)};
            return finish();
        }

        if (op2 == 0xB6 || op2 == 0xB7 || op2 == 0xBE || op2 == 0xBF) {
            auto mr = parse_modrm(c, addr16);
            if (!mr)
                return std::nullopt;
            apply_modrm_ids(ins, *mr);
            ins.mnemonic = (op2 <= 0xB7) ? Mnemonic::Movzx : Mnemonic::Movsx;
            uint8_t src_w = (op2 & 1) ? 2 : 1;
            ins.width = src_w;
            ins.ops = {Operand::make_reg(static_cast<Reg>(mr->reg), wwidth),
                       rm_operand(*mr, src_w)};
            return finish();
        }

        return std::nullopt;
    }

    default:
        return std::nullopt;
    }
}

SupersetListing superset_disassemble(ByteSpan bytes) {
    SupersetListing out;
    out.slots.resize(bytes.size());
    for (size_t i = 0; i < bytes.size(); ++i) {
        out.slots[i] = decode_at(bytes, i);
        if (out.slots[i])
            ++out.num_instrs;
        else
            ++out.num_failures;
    }
    return out;
}

} // namespace bindis
