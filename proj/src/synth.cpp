// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
#include "bindis/synth.hpp"

#include <cassert>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

namespace bindis::synth {

void Asm::nops_to(size_t offset) {
    if (offset < buf_.size())
        throw std::logic_error("nops_to target behind cursor");
    buf_.insert(buf_.end(), offset - buf_.size(), 0x90);
}

void Asm::label(const std::string& name) {
    if (!labels_.emplace(name, buf_.size()).second)
        throw std::logic_error("duplicate label " + name);
}

size_t Asm::label_pos(const std::string& name) const {
    auto it = labels_.find(name);
    if (it == labels_.end())
        throw std::logic_error("unknown label " + name);
    return it->second;
}

void Asm::push_imm32(int32_t v) {
    buf_.push_back(0x68);
    write_u32le(buf_, static_cast<uint32_t>(v));
}

void Asm::emit_modrm_mem(uint8_t reg_field, const Mem& m) {
    auto modrm = [](uint8_t mod, uint8_t reg, uint8_t rm) {
        return static_cast<uint8_t>((mod << 6) | (reg << 3) | rm);
    };
    auto sib = [](uint8_t ss, uint8_t idx, uint8_t base) {
        return static_cast<uint8_t>((ss << 6) | (idx << 3) | base);
    };
    auto scale_bits = [](uint8_t s) -> uint8_t {
        switch (s) {
        case 1: return 0;
        case 2: return 1;
        case 4: return 2;
        case 8: return 3;
        }
        throw std::logic_error("bad scale");
    };

    if (m.absolute || (!m.base && !m.index)) {
        buf_.push_back(modrm(0, reg_field, 5));
        write_u32le(buf_, static_cast<uint32_t>(m.disp));
        return;
    }
    if (!m.base && m.index) {
        // [index*scale + disp32], SIB with base=101 under mod=00.
        buf_.push_back(modrm(0, reg_field, 4));
        buf_.push_back(sib(scale_bits(m.scale), reg_id(*m.index), 5));
        write_u32le(buf_, static_cast<uint32_t>(m.disp));
        return;
    }

    uint8_t base = reg_id(*m.base);
    bool need_sib = m.index.has_value() || base == 4;
    uint8_t mod;
    if (m.disp == 0 && base != 5) {
        mod = 0;
    } else if (m.disp >= -128 && m.disp <= 127) {
        mod = 1;
    } else {
        mod = 2;
    }
    buf_.push_back(modrm(mod, reg_field, need_sib ? 4 : base));
    if (need_sib) {
        uint8_t idx = m.index ? reg_id(*m.index) : 4;
        buf_.push_back(sib(m.index ? scale_bits(m.scale) : 0, idx, base));
    }
    if (mod == 1)
        buf_.push_back(static_cast<uint8_t>(static_cast<int8_t>(m.disp)));
    else if (mod == 2)
        write_u32le(buf_, static_cast<uint32_t>(m.disp));
}

void Asm::mov_rr(Reg dst, Reg src) {
    db({0x89, static_cast<uint8_t>(0xC0 | (reg_id(src) << 3) | reg_id(dst))});
}

void Asm::mov_ri(Reg dst, int32_t imm) {
    buf_.push_back(0xB8 + reg_id(dst));
    write_u32le(buf_, static_cast<uint32_t>(imm));
}

void Asm::mov_r_m(Reg dst, const Mem& m) {
    buf_.push_back(0x8B);
    emit_modrm_mem(reg_id(dst), m);
}

void Asm::mov_m_r(const Mem& m, Reg src) {
    buf_.push_back(0x89);
    emit_modrm_mem(reg_id(src), m);
}

void Asm::mov_m_i32(const Mem& m, int32_t imm) {
    buf_.push_back(0xC7);
    emit_modrm_mem(0, m);
    write_u32le(buf_, static_cast<uint32_t>(imm));
}

void Asm::mov_eax_abs(uint32_t addr) {
    buf_.push_back(0xA1);
    write_u32le(buf_, addr);
}

void Asm::mov_abs_eax(uint32_t addr) {
    buf_.push_back(0xA3);
    write_u32le(buf_, addr);
}

void Asm::lea(Reg dst, const Mem& m) {
    buf_.push_back(0x8D);
    emit_modrm_mem(reg_id(dst), m);
}

void Asm::emit_alu_ri(uint8_t group_reg, Reg r, int32_t imm) {
    if (imm >= -128 && imm <= 127) {
        db({0x83, static_cast<uint8_t>(0xC0 | (group_reg << 3) | reg_id(r)),
            static_cast<uint8_t>(static_cast<int8_t>(imm))});
    } else {
        db({0x81, static_cast<uint8_t>(0xC0 | (group_reg << 3) | reg_id(r))});
        write_u32le(buf_, static_cast<uint32_t>(imm));
    }
}

void Asm::add_ri(Reg r, int32_t imm) { emit_alu_ri(0, r, imm); }
void Asm::sub_ri(Reg r, int32_t imm) { emit_alu_ri(5, r, imm); }
void Asm::and_ri(Reg r, int32_t imm) { emit_alu_ri(4, r, imm); }
void Asm::cmp_ri(Reg r, int32_t imm) { emit_alu_ri(7, r, imm); }

void Asm::add_rr(Reg dst, Reg src) {
    db({0x01, static_cast<uint8_t>(0xC0 | (reg_id(src) << 3) | reg_id(dst))});
}
void Asm::sub_rr(Reg dst, Reg src) {
    db({0x29, static_cast<uint8_t>(0xC0 | (reg_id(src) << 3) | reg_id(dst))});
}
void Asm::xor_rr(Reg dst, Reg src) {
    db({0x31, static_cast<uint8_t>(0xC0 | (reg_id(src) << 3) | reg_id(dst))});
}
void Asm::cmp_rr(Reg a, Reg b) {
    db({0x39, static_cast<uint8_t>(0xC0 | (reg_id(b) << 3) | reg_id(a))});
}
void Asm::test_rr(Reg a, Reg b) {
    db({0x85, static_cast<uint8_t>(0xC0 | (reg_id(b) << 3) | reg_id(a))});
}

void Asm::cmp_mi8(const Mem& m, int8_t imm) {
    buf_.push_back(0x83);
    emit_modrm_mem(7, m);
    buf_.push_back(static_cast<uint8_t>(imm));
}

void Asm::inc_m(const Mem& m) {
    buf_.push_back(0xFF);
    emit_modrm_mem(0, m);
}

void Asm::add_m_r(const Mem& m, Reg src) {
    buf_.push_back(0x01);
    emit_modrm_mem(reg_id(src), m);
}

void Asm::add_r_m(Reg dst, const Mem& m) {
    buf_.push_back(0x03);
    emit_modrm_mem(reg_id(dst), m);
}

void Asm::imul_rr(Reg dst, Reg src) {
    db({0x0F, 0xAF,
        static_cast<uint8_t>(0xC0 | (reg_id(dst) << 3) | reg_id(src))});
}

void Asm::movzx_r_m8(Reg dst, const Mem& m) {
    db({0x0F, 0xB6});
    emit_modrm_mem(reg_id(dst), m);
}

void Asm::setcc_r8(Cond cc, uint8_t reg8) {
    db({0x0F, static_cast<uint8_t>(0x90 + static_cast<uint8_t>(cc)),
        static_cast<uint8_t>(0xC0 | reg8)});
}

void Asm::jmp(const std::string& target) {
    buf_.push_back(0xEB);
    fixups_.push_back({buf_.size(), 1, target});
    buf_.push_back(0);
}

void Asm::jmp_long(const std::string& target) {
    buf_.push_back(0xE9);
    fixups_.push_back({buf_.size(), 4, target});
    write_u32le(buf_, 0);
}

void Asm::jcc(Cond cc, const std::string& target) {
    buf_.push_back(0x70 + static_cast<uint8_t>(cc));
    fixups_.push_back({buf_.size(), 1, target});
    buf_.push_back(0);
}

void Asm::call(const std::string& target) {
    buf_.push_back(0xE8);
    fixups_.push_back({buf_.size(), 4, target});
    write_u32le(buf_, 0);
}

void Asm::call_r(Reg r) {
    db({0xFF, static_cast<uint8_t>(0xC0 | (2 << 3) | reg_id(r))});
}

void Asm::ret_imm(uint16_t n) {
    buf_.push_back(0xC2);
    write_u16le(buf_, n);
}

ByteVec Asm::take() {
    for (const auto& f : fixups_) {
        int64_t rel = static_cast<int64_t>(label_pos(f.target)) -
                      static_cast<int64_t>(f.at + f.size);
        if (f.size == 1) {
            if (rel < -128 || rel > 127)
                throw std::logic_error("rel8 out of range to " + f.target);
            buf_[f.at] = static_cast<uint8_t>(static_cast<int8_t>(rel));
        } else {
            uint32_t v = static_cast<uint32_t>(rel);
            buf_[f.at] = static_cast<uint8_t>(v);
            buf_[f.at + 1] = static_cast<uint8_t>(v >> 8);
            buf_[f.at + 2] = static_cast<uint8_t>(v >> 16);
            buf_[f.at + 3] = static_cast<uint8_t>(v >> 24);
        }
    }
    fixups_.clear();
    return std::move(buf_);
}

// ---------------------------------------------------------------------------
// ELF32 writer

namespace {

constexpr uint32_t kShtProgbits = 1;
constexpr uint32_t kShtSymtab = 2;
constexpr uint32_t kShtStrtab = 3;
constexpr uint32_t kShtNobits = 8;

void put_u16(ByteVec& b, size_t at, uint16_t v) {
    b[at] = static_cast<uint8_t>(v);
    b[at + 1] = static_cast<uint8_t>(v >> 8);
}

void put_u32(ByteVec& b, size_t at, uint32_t v) {
    for (int i = 0; i < 4; ++i)
        b[at + i] = static_cast<uint8_t>(v >> (8 * i));
}

size_t add_name(ByteVec& strtab, const std::string& name) {
    size_t off = strtab.size();
    strtab.insert(strtab.end(), name.begin(), name.end());
    strtab.push_back(0);
    return off;
}

} // namespace

void ElfBuilder::add_progbits(const std::string& name, uint32_t vaddr,
                              ByteVec bytes, SectionFlags flags) {
    Sec s;
    s.name = name;
    s.type = kShtProgbits;
    s.flags = static_cast<uint32_t>(flags);
    s.vaddr = vaddr;
    s.size = static_cast<uint32_t>(bytes.size());
    s.bytes = std::move(bytes);
    secs_.push_back(std::move(s));
}

void ElfBuilder::add_nobits(const std::string& name, uint32_t vaddr,
                            uint32_t size, SectionFlags flags) {
    Sec s;
    s.name = name;
    s.type = kShtNobits;
    s.flags = static_cast<uint32_t>(flags);
    s.vaddr = vaddr;
    s.size = size;
    secs_.push_back(std::move(s));
}

void ElfBuilder::add_symbol(const std::string& name, uint32_t vaddr,
                            uint32_t size, SymbolKind kind,
                            const std::string& section_name) {
    syms_.push_back({name, vaddr, size, kind, section_name});
}

ByteVec ElfBuilder::build() const {
    // Section table order: null, user sections, [.symtab, .strtab], .shstrtab.
    struct Out {
        std::string name;
        uint32_t type = 0, flags = 0, vaddr = 0, offset = 0, size = 0;
        uint32_t link = 0, info = 0, entsize = 0;
        ByteVec bytes;
    };
    std::vector<Out> outs;
    outs.push_back({}); // SHN_UNDEF

    std::map<std::string, uint16_t> index_of;
    for (const auto& s : secs_) {
        Out o;
        o.name = s.name;
        o.type = s.type;
        o.flags = s.flags;
        o.vaddr = s.vaddr;
        o.size = s.size;
        o.bytes = s.bytes;
        index_of[s.name] = static_cast<uint16_t>(outs.size());
        outs.push_back(std::move(o));
    }

    if (!syms_.empty()) {
        ByteVec strtab{0};
        ByteVec symtab(16, 0); // null symbol
        for (const auto& sym : syms_) {
            size_t name_off = add_name(strtab, sym.name);
            ByteVec ent(16, 0);
            put_u32(ent, 0, static_cast<uint32_t>(name_off));
            put_u32(ent, 4, sym.vaddr);
            put_u32(ent, 8, sym.size);
            uint8_t type = sym.kind == SymbolKind::Function ? 2
                         : sym.kind == SymbolKind::Object   ? 1
                                                            : 0;
            ent[12] = static_cast<uint8_t>((1 << 4) | type); // STB_GLOBAL
            auto it = index_of.find(sym.section);
            put_u16(ent, 14, it == index_of.end() ? 0 : it->second);
            symtab.insert(symtab.end(), ent.begin(), ent.end());
        }
        uint16_t symtab_idx = static_cast<uint16_t>(outs.size());
        Out st;
        st.name = ".symtab";
        st.type = kShtSymtab;
        st.size = static_cast<uint32_t>(symtab.size());
        st.bytes = std::move(symtab);
        st.link = symtab_idx + 1;
        st.info = 1;
        st.entsize = 16;
        outs.push_back(std::move(st));
        Out str;
        str.name = ".strtab";
        str.type = kShtStrtab;
        str.size = static_cast<uint32_t>(strtab.size());
        str.bytes = std::move(strtab);
        outs.push_back(std::move(str));
    }

    Out shstr;
    shstr.name = ".shstrtab";
    shstr.type = kShtStrtab;
    ByteVec shstrtab{0};
    std::vector<uint32_t> name_offs(outs.size() + 1, 0);
    for (size_t i = 1; i < outs.size(); ++i)
        name_offs[i] = static_cast<uint32_t>(add_name(shstrtab, outs[i].name));
    name_offs[outs.size()] =
        static_cast<uint32_t>(add_name(shstrtab, shstr.name));
    shstr.size = static_cast<uint32_t>(shstrtab.size());
    shstr.bytes = std::move(shstrtab);
    outs.push_back(std::move(shstr));

    ByteVec file(52, 0);
    const uint8_t ident[8] = {0x7F, 'E', 'L', 'F', 1, 1, 1, 0};
    std::memcpy(file.data(), ident, 8);
    put_u16(file, 16, 2);  // ET_EXEC
    put_u16(file, 18, 3);  // EM_386
    put_u32(file, 20, 1);
    put_u32(file, 24, entry_);
    put_u16(file, 40, 52);
    put_u16(file, 46, 40);
    put_u16(file, 48, static_cast<uint16_t>(outs.size()));
    put_u16(file, 50, static_cast<uint16_t>(outs.size() - 1));

    for (auto& o : outs) {
        if (o.type == kShtNobits || o.bytes.empty()) {
            o.offset = static_cast<uint32_t>(file.size());
            continue;
        }
        while (file.size() % 4 != 0)
            file.push_back(0);
        o.offset = static_cast<uint32_t>(file.size());
        file.insert(file.end(), o.bytes.begin(), o.bytes.end());
    }

    while (file.size() % 4 != 0)
        file.push_back(0);
    put_u32(file, 32, static_cast<uint32_t>(file.size())); // e_shoff
    for (size_t i = 0; i < outs.size(); ++i) {
        const auto& o = outs[i];
        ByteVec sh(40, 0);
        put_u32(sh, 0, i == 0 ? 0 : name_offs[i]);
        put_u32(sh, 4, o.type);
        put_u32(sh, 8, o.flags);
        put_u32(sh, 12, o.vaddr);
        put_u32(sh, 16, o.offset);
        put_u32(sh, 20, o.size);
        put_u32(sh, 24, o.link);
        put_u32(sh, 28, o.info);
        put_u32(sh, 32, i == 0 ? 0 : 4);
        put_u32(sh, 36, o.entsize);
        file.insert(file.end(), sh.begin(), sh.end());
    }
    return file;
}

// ---------------------------------------------------------------------------
// DWARF v4 writer

namespace {

constexpr uint64_t kAbbrevCu = 1;
constexpr uint64_t kAbbrevBaseType = 2;
constexpr uint64_t kAbbrevSubprogFb = 3;
constexpr uint64_t kAbbrevSubprog = 4;
constexpr uint64_t kAbbrevVar = 5;

void put_str(ByteVec& b, const std::string& s) {
    b.insert(b.end(), s.begin(), s.end());
    b.push_back(0);
}

void put_exprloc(ByteVec& b, const ByteVec& expr) {
    write_uleb128(b, expr.size());
    b.insert(b.end(), expr.begin(), expr.end());
}

ByteVec loc_expr_for(const DwarfBuilder::Var& v) {
    ByteVec e;
    if (v.raw_location)
        return *v.raw_location;
    if (v.global_addr) {
        e.push_back(0x03); // DW_OP_addr
        write_u32le(e, *v.global_addr);
    } else if (v.fbreg_off) {
        e.push_back(0x91); // DW_OP_fbreg
        write_sleb128(e, *v.fbreg_off);
    } else if (v.breg) {
        e.push_back(v.breg->first == FrameBase::Ebp ? 0x75 : 0x74);
        write_sleb128(e, v.breg->second);
    } else {
        throw std::logic_error("variable " + v.name + " has no location");
    }
    return e;
}

} // namespace

DwarfBuilder::Output DwarfBuilder::build() const {
    Output out;

    auto& ab = out.debug_abbrev;
    auto decl = [&ab](uint64_t code, uint64_t tag, bool children,
                      std::initializer_list<std::pair<uint64_t, uint64_t>>
                          attrs) {
        write_uleb128(ab, code);
        write_uleb128(ab, tag);
        ab.push_back(children ? 1 : 0);
        for (auto [at, form] : attrs) {
            write_uleb128(ab, at);
            write_uleb128(ab, form);
        }
        write_uleb128(ab, 0);
        write_uleb128(ab, 0);
    };
    decl(kAbbrevCu, 0x11, true, {{0x03, 0x08}});
    decl(kAbbrevBaseType, 0x24, false, {{0x03, 0x08}, {0x0b, 0x06}});
    decl(kAbbrevSubprogFb, 0x2e, true,
         {{0x03, 0x08}, {0x11, 0x01}, {0x12, 0x06}, {0x40, 0x18}});
    decl(kAbbrevSubprog, 0x2e, true,
         {{0x03, 0x08}, {0x11, 0x01}, {0x12, 0x06}});
    decl(kAbbrevVar, 0x34, false, {{0x03, 0x08}, {0x49, 0x13}, {0x02, 0x18}});
    write_uleb128(ab, 0); // end of table

    auto& di = out.debug_info;
    di.resize(11, 0); // unit_length + version + abbrev_off + addr_size
    put_u16(di, 4, 4);
    di[10] = 4;

    write_uleb128(di, kAbbrevCu);
    put_str(di, cu_name_);

    // One base type per distinct size; ref4 offsets are CU-header relative,
    // which for a single unit equals the section offset.
    std::map<uint32_t, uint32_t> type_off;
    auto collect = [&type_off](const std::vector<Var>& vars) {
        for (const auto& v : vars)
            type_off.emplace(v.byte_size, 0);
    };
    collect(globals_);
    for (const auto& f : funcs_)
        collect(f.vars);
    for (auto& [size, off] : type_off) {
        off = static_cast<uint32_t>(di.size());
        write_uleb128(di, kAbbrevBaseType);
        put_str(di, "u" + std::to_string(size));
        write_u32le(di, size);
    }

    auto emit_var = [&di, &type_off](const Var& v) {
        write_uleb128(di, kAbbrevVar);
        put_str(di, v.name);
        write_u32le(di, type_off.at(v.byte_size));
        put_exprloc(di, loc_expr_for(v));
    };

    for (const auto& v : globals_)
        emit_var(v);

    for (const auto& f : funcs_) {
        write_uleb128(di, f.frame_base ? kAbbrevSubprogFb : kAbbrevSubprog);
        put_str(di, f.name);
        write_u32le(di, f.low_pc);
        write_u32le(di, f.size);
        if (f.frame_base) {
            ByteVec fb;
            fb.push_back(*f.frame_base == FrameBase::Ebp ? 0x75 : 0x74);
            write_sleb128(fb, 0);
            put_exprloc(di, fb);
        }
        for (const auto& v : f.vars)
            emit_var(v);
        write_uleb128(di, 0); // end of subprogram children
    }
    write_uleb128(di, 0); // end of CU children
    put_u32(di, 0, static_cast<uint32_t>(di.size() - 4));
    return out;
}

// ---------------------------------------------------------------------------
// Fixtures

namespace {

constexpr LoopFixtureLayout kLoop{};

void expect_pos(const Asm& a, size_t want, const char* what) {
    if (a.pos() != want)
        throw std::logic_error(std::string("fixture drift at ") + what +
                               ": have " + std::to_string(a.pos()) +
                               " want " + std::to_string(want));
}

struct FuncSym {
    std::string name;
    size_t off;
    size_t size;
};

} // namespace

ByteVec make_loop_fixture_elf() {
    Asm code;
    std::vector<FuncSym> funcs;
    {
        auto begin = [&](const char* name) {
            funcs.push_back({name, code.pos(), 0});
        };
        auto end = [&](size_t pad_to) {
            funcs.back().size = code.pos() - funcs.back().off;
            code.nops_to(pad_to);
        };

        begin("bump_arg");
        code.push_r(Reg::Ebp);
        code.mov_rr(Reg::Ebp, Reg::Esp);
        code.mov_r_m(Reg::Eax, Mem::base_disp(Reg::Ebp, 8));
        code.add_ri(Reg::Eax, 1);
        code.pop_r(Reg::Ebp);
        code.ret();
        end(32);

        begin("double_seven");
        code.push_r(Reg::Ebp);
        code.mov_rr(Reg::Ebp, Reg::Esp);
        code.sub_ri(Reg::Esp, 0x10);
        code.mov_m_i32(Mem::base_disp(Reg::Ebp, -4), 7);
        code.mov_r_m(Reg::Eax, Mem::base_disp(Reg::Ebp, -4));
        code.add_rr(Reg::Eax, Reg::Eax);
        code.leave();
        code.ret();
        end(64);

        begin("zero");
        code.label("zero_entry");
        code.xor_rr(Reg::Eax, Reg::Eax);
        code.ret();
        end(96);

        begin("tick_gbuf");
        code.push_r(Reg::Ebp);
        code.mov_rr(Reg::Ebp, Reg::Esp);
        code.mov_eax_abs(kLoop.data_vaddr);
        code.add_ri(Reg::Eax, 1);
        code.mov_abs_eax(kLoop.data_vaddr);
        code.pop_r(Reg::Ebp);
        code.ret();
        end(128);

        begin("clamp_pos");
        code.push_r(Reg::Ebp);
        code.mov_rr(Reg::Ebp, Reg::Esp);
        code.mov_r_m(Reg::Eax, Mem::base_disp(Reg::Ebp, 8));
        code.cmp_ri(Reg::Eax, 0);
        code.jcc(Cond::Le, "clamp_done");
        code.add_ri(Reg::Eax, 2);
        code.label("clamp_done");
        code.pop_r(Reg::Ebp);
        code.ret();
        end(176);

        begin("call_zero");
        code.call("zero_entry");
        code.ret();
        end(208);

        begin("pick_second");
        code.push_r(Reg::Esi);
        code.push_r(Reg::Ebp);
        code.mov_rr(Reg::Ebp, Reg::Esp);
        code.mov_r_m(Reg::Esi, Mem::base_disp(Reg::Ebp, 12));
        code.mov_rr(Reg::Eax, Reg::Esi);
        code.pop_r(Reg::Ebp);
        code.pop_r(Reg::Esi);
        code.ret();
        end(256);

        begin("fresh_local");
        code.push_r(Reg::Ebp);
        code.mov_rr(Reg::Ebp, Reg::Esp);
        code.sub_ri(Reg::Esp, 4);
        code.mov_m_i32(Mem::base_disp(Reg::Ebp, -4), 0);
        code.mov_r_m(Reg::Eax, Mem::base_disp(Reg::Ebp, -4));
        code.leave();
        code.ret();
        end(kLoop.entry);

        // discard_moves: walks the 3-entry rules array, clearing per-entry
        // state; the flag store only runs when the body branch falls through.
        begin("discard_moves");
        expect_pos(code, kLoop.entry, "discard_moves entry");
        code.push_r(Reg::Ebp);
        code.mov_rr(Reg::Ebp, Reg::Esp);
        code.sub_ri(Reg::Esp, 0x10);
        expect_pos(code, kLoop.init_store, "init_store");
        code.mov_m_i32(Mem::base_disp(Reg::Ebp, -12), 0);
        expect_pos(code, kLoop.entry_jmp, "entry_jmp");
        code.jmp("loop_check");
        code.label("loop_body");
        expect_pos(code, kLoop.counter_load, "counter_load");
        code.mov_r_m(Reg::Eax, Mem::base_disp(Reg::Ebp, -12));
        expect_pos(code, kLoop.rule_store, "rule_store");
        code.mov_m_r(Mem::index_disp(Reg::Eax, 8, kLoop.data_vaddr + 8),
                     Reg::Edx);
        expect_pos(code, kLoop.body_branch, "body_branch");
        code.jcc(Cond::Le, "loop_next");
        expect_pos(code, kLoop.flag_load, "flag_load");
        code.mov_r_m(Reg::Edx, Mem::base_disp(Reg::Ebp, -16));
        expect_pos(code, kLoop.flag_store, "flag_store");
        code.mov_m_r(Mem::index_disp(Reg::Eax, 8, kLoop.data_vaddr + 12),
                     Reg::Edx);
        code.label("loop_next");
        expect_pos(code, kLoop.counter_load2, "counter_load2");
        code.mov_r_m(Reg::Ecx, Mem::base_disp(Reg::Ebp, -12));
        expect_pos(code, kLoop.counter_inc, "counter_inc");
        code.inc_m(Mem::base_disp(Reg::Ebp, -12));
        code.label("loop_check");
        expect_pos(code, kLoop.counter_cmp, "counter_cmp");
        code.cmp_mi8(Mem::base_disp(Reg::Ebp, -12), 2);
        expect_pos(code, kLoop.loop_branch, "loop_branch");
        code.jcc(Cond::Le, "loop_body");
        expect_pos(code, kLoop.tail_load, "tail_load");
        code.mov_eax_abs(kLoop.data_vaddr + 24);
        expect_pos(code, kLoop.epilogue_leave, "leave");
        code.leave();
        code.ret();
        expect_pos(code, kLoop.end, "end");
        end(kLoop.frame2_entry);

        begin("init_scratch");
        expect_pos(code, kLoop.frame2_entry, "init_scratch entry");
        code.push_r(Reg::Ebp);
        code.push_r(Reg::Esi);
        code.mov_rr(Reg::Ebp, Reg::Esp);
        code.sub_ri(Reg::Esp, 0x20);
        expect_pos(code, kLoop.frame2_store, "frame2_store");
        code.mov_m_i32(Mem::base_disp(Reg::Ebp, -0x20), 42);
        code.mov_rr(Reg::Esp, Reg::Ebp);
        code.pop_r(Reg::Esi);
        code.pop_r(Reg::Ebp);
        code.ret();
        end(kLoop.text_size);
    }

    ByteVec text = code.take();

    ByteVec rodata(16, 0);
    for (size_t i = 0; i < 10; ++i)
        rodata[i] = static_cast<uint8_t>(i + 1);
    ByteVec data(32, 0);
    for (size_t i = 8; i < 32; ++i)
        data[i] = static_cast<uint8_t>(i);

    ElfBuilder elf;
    elf.set_entry(kLoop.text_vaddr);
    elf.add_progbits(".text", kLoop.text_vaddr, std::move(text),
                     SectionFlags::AllocExec);
    elf.add_progbits(".rodata", kLoop.rodata_vaddr, std::move(rodata),
                     SectionFlags::Alloc);
    elf.add_progbits(".data", kLoop.data_vaddr, std::move(data),
                     SectionFlags::AllocWrite);
    elf.add_nobits(".bss", kLoop.bss_vaddr, 16, SectionFlags::AllocWrite);

    for (const auto& f : funcs)
        elf.add_symbol(f.name, kLoop.text_vaddr + static_cast<uint32_t>(f.off),
                       static_cast<uint32_t>(f.size), SymbolKind::Function,
                       ".text");
    elf.add_symbol("lut10", kLoop.rodata_vaddr, 10, SymbolKind::Object,
                   ".rodata");
    elf.add_symbol("gbuf8", kLoop.data_vaddr, 8, SymbolKind::Object, ".data");
    elf.add_symbol("rules", kLoop.data_vaddr + 8, 24, SymbolKind::Object,
                   ".data");
    elf.add_symbol("zbuf", kLoop.bss_vaddr, 16, SymbolKind::Object, ".bss");

    DwarfBuilder dw("rules.c");
    {
        DwarfBuilder::Var lut;
        lut.name = "lut10";
        lut.byte_size = 10;
        lut.global_addr = kLoop.rodata_vaddr;
        dw.add_global(lut);
        DwarfBuilder::Var gbuf;
        gbuf.name = "gbuf8";
        gbuf.byte_size = 8;
        gbuf.global_addr = kLoop.data_vaddr;
        dw.add_global(gbuf);
        DwarfBuilder::Var rules;
        rules.name = "rules";
        rules.byte_size = 24;
        rules.global_addr = kLoop.data_vaddr + 8;
        dw.add_global(rules);
        DwarfBuilder::Var zbuf;
        zbuf.name = "zbuf";
        zbuf.byte_size = 16;
        zbuf.global_addr = kLoop.bss_vaddr;
        dw.add_global(zbuf);
        DwarfBuilder::Var alias;
        alias.name = "alias_p";
        alias.byte_size = 4;
        alias.raw_location = ByteVec{0x03, 0x10, 0xA0, 0x04, 0x08, 0x06};
        dw.add_global(alias); // addr + deref: unresolvable, counted

        DwarfBuilder::Func dm;
        dm.name = "discard_moves";
        dm.low_pc = kLoop.text_vaddr + static_cast<uint32_t>(kLoop.entry);
        dm.size = static_cast<uint32_t>(kLoop.end - kLoop.entry);
        dm.frame_base = FrameBase::Ebp;
        DwarfBuilder::Var i;
        i.name = "i";
        i.byte_size = 4;
        i.fbreg_off = -12;
        dm.vars.push_back(i);
        DwarfBuilder::Var user_f;
        user_f.name = "user_f";
        user_f.byte_size = 4;
        user_f.breg = {FrameBase::Ebp, -16};
        dm.vars.push_back(user_f);
        dw.add_func(std::move(dm));

        DwarfBuilder::Func is;
        is.name = "init_scratch";
        is.low_pc = kLoop.text_vaddr + static_cast<uint32_t>(kLoop.frame2_entry);
        is.size = 19;
        is.frame_base = FrameBase::Ebp;
        DwarfBuilder::Var scratch;
        scratch.name = "scratch";
        scratch.byte_size = 16;
        scratch.fbreg_off = -32;
        is.vars.push_back(scratch);
        dw.add_func(std::move(is));
    }
    auto dwo = dw.build();
    elf.add_progbits(".debug_info", 0, std::move(dwo.debug_info),
                     SectionFlags::None);
    elf.add_progbits(".debug_abbrev", 0, std::move(dwo.debug_abbrev),
                     SectionFlags::None);
    return elf.build();
}

ByteVec make_two_entry_elf() {
    Asm code;
    code.nops_to(0x310);
    code.push_r(Reg::Ebp);
    code.mov_rr(Reg::Ebp, Reg::Esp);
    code.mov_r_m(Reg::Eax, Mem::base_disp(Reg::Ebp, 8));
    code.pop_r(Reg::Ebp);
    code.ret();
    size_t alpha_size = code.pos() - 0x310;
    code.nops_to(0x400);
    code.xor_rr(Reg::Eax, Reg::Eax);
    code.ret();
    size_t beta_size = code.pos() - 0x400;
    code.nops_to(0x500);

    ElfBuilder elf;
    elf.set_entry(0x8049310);
    elf.add_progbits(".text", 0x8049000, code.take(),
                     SectionFlags::AllocExec);
    elf.add_symbol("alpha", 0x8049310, static_cast<uint32_t>(alpha_size),
                   SymbolKind::Function, ".text");
    elf.add_symbol("beta", 0x8049400, static_cast<uint32_t>(beta_size),
                   SymbolKind::Function, ".text");
    return elf.build();
}

ByteVec make_plt_elf() {
    Asm plt;
    plt.db({0xFF, 0x25}); // jmp dword [0x804a010]
    plt.raw(ByteVec{0x10, 0xA0, 0x04, 0x08});
    plt.nops_to(16);

    Asm text;
    text.push_r(Reg::Ebp);
    text.mov_rr(Reg::Ebp, Reg::Esp);
    // call the stub across the section gap
    text.db({0xE8});
    {
        // rel32 from next insn (0x8049008) back to 0x8048f00
        int32_t rel = static_cast<int32_t>(0x8048f00) -
                      static_cast<int32_t>(0x8049008);
        ByteVec tmp;
        write_u32le(tmp, static_cast<uint32_t>(rel));
        text.raw(tmp);
    }
    text.mov_ri(Reg::Eax, 0);
    text.pop_r(Reg::Ebp);
    text.ret();
    size_t main_size = text.pos();
    text.nops_to(32);

    ElfBuilder elf;
    elf.set_entry(0x8049000);
    elf.add_progbits(".plt", 0x8048f00, plt.take(), SectionFlags::AllocExec);
    elf.add_progbits(".text", 0x8049000, text.take(),
                     SectionFlags::AllocExec);
    elf.add_progbits(".data", 0x804a010, ByteVec(4, 0),
                     SectionFlags::AllocWrite);
    elf.add_symbol("getchar@plt", 0x8048f00, 16, SymbolKind::Function, ".plt");
    elf.add_symbol("main", 0x8049000, static_cast<uint32_t>(main_size),
                   SymbolKind::Function, ".text");
    return elf.build();
}

ByteVec make_stripped_elf() {
    Asm code;
    code.nops_to(16);
    code.xor_rr(Reg::Eax, Reg::Eax);
    code.ret();
    code.nops_to(32);
    ElfBuilder elf;
    elf.set_entry(0x8049010);
    elf.add_progbits(".text", 0x8049000, code.take(),
                     SectionFlags::AllocExec);
    return elf.build();
}

ByteVec make_empty_text_elf() {
    ElfBuilder elf;
    elf.add_progbits(".text", 0x8049000, ByteVec{}, SectionFlags::AllocExec);
    elf.add_progbits(".data", 0x804a000, ByteVec(8, 0),
                     SectionFlags::AllocWrite);
    elf.add_symbol("blob", 0x804a000, 8, SymbolKind::Object, ".data");
    return elf.build();
}

ByteVec make_elf64_stub() {
    ByteVec b(64, 0);
    const uint8_t ident[8] = {0x7F, 'E', 'L', 'F', 2, 1, 1, 0};
    std::memcpy(b.data(), ident, 8);
    put_u16(b, 16, 2);
    put_u16(b, 18, 62); // EM_X86_64
    return b;
}

ByteVec make_program_elf(uint64_t seed, int nfuncs,
                         const std::string& cu_name) {
    std::mt19937_64 rng(seed);
    constexpr uint32_t kText = 0x8049000;
    constexpr uint32_t kRodata = 0x804b000;
    constexpr uint32_t kData = 0x804c000;
    constexpr uint32_t kBss = 0x804d000;

    struct GlobalSpec {
        const char* name;
        uint32_t addr;
        uint32_t size;
        const char* section;
    };
    const GlobalSpec globals[] = {
        {"table_a", kData, 8, ".data"},      {"table_b", kData + 8, 12, ".data"},
        {"count_c", kData + 20, 4, ".data"}, {"limit_r", kRodata, 4, ".rodata"},
        {"spare_z", kBss, 8, ".bss"},
    };

    Asm code;
    DwarfBuilder dw(cu_name);
    ElfBuilder elf;
    std::vector<FuncSym> funcs;

    for (const auto& g : globals) {
        DwarfBuilder::Var v;
        v.name = g.name;
        v.byte_size = g.size;
        v.global_addr = g.addr;
        dw.add_global(v);
    }

    for (int fi = 0; fi < nfuncs; ++fi) {
        std::string name = cu_name.substr(0, cu_name.find('.')) + "_fn" +
                           std::to_string(fi);
        size_t entry = code.pos();
        code.label(name + "_entry");
        DwarfBuilder::Func df;
        df.name = name;

        int shape = static_cast<int>(uniform_below(rng, 4));
        if (shape == 3 && fi == 0)
            shape = 0; // callers need a callee before them
        if (shape == 0 || shape == 3) {
            // ebp frame with locals; shape 3 adds a call.
            int nlocals = 1 + static_cast<int>(uniform_below(rng, 3));
            int frame = 8 * (nlocals + 1);
            code.push_r(Reg::Ebp);
            code.mov_rr(Reg::Ebp, Reg::Esp);
            code.sub_ri(Reg::Esp, frame);
            df.frame_base = FrameBase::Ebp;
            for (int li = 0; li < nlocals; ++li) {
                int32_t off = -8 * (li + 1);
                uint32_t sz = uniform_below(rng, 2) == 0 ? 4 : 8;
                code.mov_m_i32(Mem::base_disp(Reg::Ebp, off),
                               static_cast<int32_t>(uniform_below(rng, 90)));
                if (uniform_below(rng, 2) == 0) {
                    code.mov_r_m(Reg::Eax, Mem::base_disp(Reg::Ebp, off));
                    code.add_ri(Reg::Eax,
                                static_cast<int32_t>(uniform_below(rng, 9)) + 1);
                    code.mov_m_r(Mem::base_disp(Reg::Ebp, off), Reg::Eax);
                }
                if (uniform_below(rng, 2) == 0) {
                    // touch the middle of the local: never block-relative
                    code.mov_m_i32(Mem::base_disp(Reg::Ebp, off + 4), 1);
                }
                DwarfBuilder::Var v;
                v.name = "v" + std::to_string(li);
                v.byte_size = sz;
                if (uniform_below(rng, 2) == 0)
                    v.fbreg_off = off;
                else
                    v.breg = {FrameBase::Ebp, off};
                df.vars.push_back(v);
            }
            if (uniform_below(rng, 2) == 0) {
                const auto& g = globals[uniform_below(rng, 5)];
                if (g.section[1] == 'd' && uniform_below(rng, 2) == 0)
                    code.mov_abs_eax(g.addr);
                else
                    code.mov_eax_abs(g.addr);
            }
            if (uniform_below(rng, 2) == 0) {
                std::string done = name + "_done";
                code.cmp_ri(Reg::Eax, static_cast<int32_t>(
                                          uniform_below(rng, 30)));
                code.jcc(uniform_below(rng, 2) == 0 ? Cond::Le : Cond::Ne,
                         done);
                code.add_ri(Reg::Eax, 1);
                code.label(done);
            }
            if (shape == 3) {
                const auto& callee = funcs[uniform_below(rng, funcs.size())];
                code.push_imm8(static_cast<int8_t>(uniform_below(rng, 50)));
                code.call(callee.name + "_entry");
                code.add_ri(Reg::Esp, 4);
            }
            code.leave();
            code.ret();
        } else if (shape == 1) {
            // esp frame leaf with a direct esp-relative local.
            code.sub_ri(Reg::Esp, 8);
            code.mov_m_i32(Mem::base_disp(Reg::Esp, 0),
                           static_cast<int32_t>(uniform_below(rng, 50)));
            code.mov_r_m(Reg::Eax, Mem::base_disp(Reg::Esp, 0));
            if (uniform_below(rng, 2) == 0)
                code.add_ri(Reg::Eax, 3);
            code.add_ri(Reg::Esp, 8);
            code.ret();
            DwarfBuilder::Var v;
            v.name = "s0";
            v.byte_size = 8;
            v.breg = {FrameBase::Esp, 0}; // at [esp] after the sub
            df.vars.push_back(v);
        } else {
            // register-only leaf
            code.mov_ri(Reg::Eax, static_cast<int32_t>(uniform_below(rng, 99)));
            if (uniform_below(rng, 2) == 0) {
                code.mov_rr(Reg::Edx, Reg::Eax);
                code.imul_rr(Reg::Eax, Reg::Edx);
            }
            if (uniform_below(rng, 2) == 0)
                code.setcc_r8(Cond::Ne, 0); // setne al
            code.ret();
        }

        size_t size = code.pos() - entry;
        funcs.push_back({name, entry, size});
        df.low_pc = kText + static_cast<uint32_t>(entry);
        df.size = static_cast<uint32_t>(size);
        dw.add_func(std::move(df));
        code.nop(1 + uniform_below(rng, 6));
    }

    ByteVec text = code.take();

    elf.set_entry(kText);
    elf.add_progbits(".text", kText, std::move(text),
                     SectionFlags::AllocExec);
    ByteVec ro(16, 0);
    ro[0] = 9;
    elf.add_progbits(".rodata", kRodata, std::move(ro), SectionFlags::Alloc);
    elf.add_progbits(".data", kData, ByteVec(24, 0x11),
                     SectionFlags::AllocWrite);
    elf.add_nobits(".bss", kBss, 8, SectionFlags::AllocWrite);
    for (const auto& f : funcs)
        elf.add_symbol(f.name, kText + static_cast<uint32_t>(f.off),
                       static_cast<uint32_t>(f.size), SymbolKind::Function,
                       ".text");
    for (const auto& g : globals)
        elf.add_symbol(g.name, g.addr, g.size, SymbolKind::Object, g.section);

    auto dwo = dw.build();
    elf.add_progbits(".debug_info", 0, std::move(dwo.debug_info),
                     SectionFlags::None);
    elf.add_progbits(".debug_abbrev", 0, std::move(dwo.debug_abbrev),
                     SectionFlags::None);
    return elf.build();
}

std::vector<std::string> write_fixture_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto write = [&dir](const std::string& name, const ByteVec& bytes) {
        std::ofstream f(dir + "/" + name, std::ios::binary);
        f.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
        if (!f)
            throw std::runtime_error("cannot write " + dir + "/" + name);
        return name;
    };
    std::vector<std::string> names;
    names.push_back(write("loop_fixture.elf", make_loop_fixture_elf()));
    names.push_back(write("two_entry.elf", make_two_entry_elf()));
    names.push_back(write("plt.elf", make_plt_elf()));
    names.push_back(write("stripped.elf", make_stripped_elf()));
    names.push_back(write("empty_text.elf", make_empty_text_elf()));
    names.push_back(write("not32.elf", make_elf64_stub()));
    names.push_back(write("prog_a.elf", make_program_elf(11, 14, "alpha.c")));
    names.push_back(write("prog_b.elf", make_program_elf(22, 14, "bravo.c")));
    names.push_back(write("prog_c.elf", make_program_elf(33, 14, "carol.c")));
    return names;
}

} // namespace bindis::synth
