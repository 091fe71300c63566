// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Test-binary synthesis: a small x86 assembler, an ELF32 writer and a
// DWARF v4 writer. The sandbox has no 32-bit corpus, so every fixture the
// tests and the pipeline run on is generated from here, deterministically.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bindis/common.hpp"
#include "bindis/decoder.hpp"
#include "bindis/elf.hpp"

namespace bindis::synth {

struct Mem {
    std::optional<Reg> base;
    std::optional<Reg> index;
    uint8_t scale = 1;
    int32_t disp = 0;
    bool absolute = false; // plain [disp32]

    static Mem at(uint32_t addr) {
        Mem m;
        m.disp = static_cast<int32_t>(addr);
        m.absolute = true;
        return m;
    }
    static Mem base_disp(Reg b, int32_t d) {
        Mem m;
        m.base = b;
        m.disp = d;
        return m;
    }
    static Mem index_disp(Reg i, uint8_t scale, uint32_t addr) {
        Mem m;
        m.index = i;
        m.scale = scale;
        m.disp = static_cast<int32_t>(addr);
        return m;
    }
};

// Emits exact byte encodings; the decoder tests round-trip through it.
class Asm {
public:
    size_t pos() const { return buf_.size(); }

    void db(std::initializer_list<uint8_t> bytes) {
        buf_.insert(buf_.end(), bytes.begin(), bytes.end());
    }
    void raw(ByteSpan bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }
    void nop(size_t n = 1) { buf_.insert(buf_.end(), n, 0x90); }
    void nops_to(size_t offset);

    void label(const std::string& name);
    size_t label_pos(const std::string& name) const;

    void push_r(Reg r) { buf_.push_back(0x50 + reg_id(r)); }
    void pop_r(Reg r) { buf_.push_back(0x58 + reg_id(r)); }
    void push_imm8(int8_t v) { db({0x6A, static_cast<uint8_t>(v)}); }
    void push_imm32(int32_t v);

    void mov_rr(Reg dst, Reg src);               // 89 /r
    void mov_ri(Reg dst, int32_t imm);           // B8+r
    void mov_r_m(Reg dst, const Mem& m);         // 8B /r
    void mov_m_r(const Mem& m, Reg src);         // 89 /r
    void mov_m_i32(const Mem& m, int32_t imm);   // C7 /0
    void mov_eax_abs(uint32_t addr);             // A1
    void mov_abs_eax(uint32_t addr);             // A3
    void lea(Reg dst, const Mem& m);             // 8D /r

    void add_ri(Reg r, int32_t imm);
    void sub_ri(Reg r, int32_t imm);
    void add_rr(Reg dst, Reg src);               // 01 /r
    void sub_rr(Reg dst, Reg src);               // 29 /r
    void xor_rr(Reg dst, Reg src);               // 31 /r
    void and_ri(Reg r, int32_t imm);
    void cmp_ri(Reg r, int32_t imm);
    void cmp_mi8(const Mem& m, int8_t imm);      // 83 /7 ib
    void cmp_rr(Reg a, Reg b);                   // 39 /r
    void test_rr(Reg a, Reg b);                  // 85 /r
    void inc_r(Reg r) { buf_.push_back(0x40 + reg_id(r)); }
    void dec_r(Reg r) { buf_.push_back(0x48 + reg_id(r)); }
    void inc_m(const Mem& m);                    // FF /0
    void add_m_r(const Mem& m, Reg src);         // 01 /r
    void add_r_m(Reg dst, const Mem& m);         // 03 /r
    void imul_rr(Reg dst, Reg src);              // 0F AF
    void movzx_r_m8(Reg dst, const Mem& m);      // 0F B6
    void setcc_r8(Cond cc, uint8_t reg8);        // 0F 9x /r mod=3

    void jmp(const std::string& target);                 // EB rel8
    void jmp_long(const std::string& target);            // E9 rel32
    void jcc(Cond cc, const std::string& target);        // 7x rel8
    void call(const std::string& target);                // E8 rel32
    void call_r(Reg r);                                  // FF /2 mod=3
    void ret() { buf_.push_back(0xC3); }
    void ret_imm(uint16_t n);
    void leave() { buf_.push_back(0xC9); }

    // Resolves branch fixups and returns the bytes.
    ByteVec take();

private:
    static uint8_t reg_id(Reg r) { return static_cast<uint8_t>(r); }
    void emit_modrm_mem(uint8_t reg_field, const Mem& m);
    void emit_alu_ri(uint8_t group_reg, Reg r, int32_t imm);

    struct Fixup {
        size_t at = 0;      // position of the rel field
        uint8_t size = 1;   // 1 or 4
        std::string target;
    };
    ByteVec buf_;
    std::map<std::string, size_t> labels_;
    std::vector<Fixup> fixups_;
};

enum class SectionFlags : uint32_t {
    Alloc = 0x2,
    AllocExec = 0x6,
    AllocWrite = 0x3,
    None = 0,
};

class ElfBuilder {
public:
    void add_progbits(const std::string& name, uint32_t vaddr, ByteVec bytes,
                      SectionFlags flags);
    void add_nobits(const std::string& name, uint32_t vaddr, uint32_t size,
                    SectionFlags flags);
    void add_symbol(const std::string& name, uint32_t vaddr, uint32_t size,
                    SymbolKind kind, const std::string& section_name);
    void set_entry(uint32_t vaddr) { entry_ = vaddr; }

    ByteVec build() const;

private:
    struct Sec {
        std::string name;
        uint32_t type = 1;
        uint32_t flags = 0;
        uint32_t vaddr = 0;
        uint32_t size = 0;
        ByteVec bytes;
    };
    struct Sym {
        std::string name;
        uint32_t vaddr = 0;
        uint32_t size = 0;
        SymbolKind kind = SymbolKind::Other;
        std::string section;
    };
    std::vector<Sec> secs_;
    std::vector<Sym> syms_;
    uint32_t entry_ = 0;
};

class DwarfBuilder {
public:
    struct Var {
        std::string name;
        uint32_t byte_size = 4;
        // one of:
        std::optional<uint32_t> global_addr;
        std::optional<int32_t> fbreg_off;           // via DW_AT_frame_base
        std::optional<std::pair<FrameBase, int32_t>> breg; // direct breg4/5
        std::optional<ByteVec> raw_location;        // arbitrary expression
    };
    struct Func {
        std::string name;
        uint32_t low_pc = 0;
        uint32_t size = 0;
        std::optional<FrameBase> frame_base; // emitted as DW_OP_breg 0
        std::vector<Var> vars;
    };

    explicit DwarfBuilder(std::string cu_name) : cu_name_(std::move(cu_name)) {}
    void add_func(Func f) { funcs_.push_back(std::move(f)); }
    void add_global(Var v) { globals_.push_back(std::move(v)); }

    struct Output {
        ByteVec debug_info;
        ByteVec debug_abbrev;
    };
    Output build() const;

private:
    std::string cu_name_;
    std::vector<Func> funcs_;
    std::vector<Var> globals_;
};

// Byte offsets of the loop fixture's instructions inside the code vector.
struct LoopFixtureLayout {
    size_t entry = 313;
    size_t init_store = 319;   // mov dword [ebp-0xc], 0
    size_t entry_jmp = 326;    // jmp to the loop check
    size_t counter_load = 328; // mov eax, [ebp-0xc]
    size_t rule_store = 331;   // mov [eax*8+0x804a018], edx
    size_t body_branch = 338;  // jle over the flag update
    size_t flag_load = 340;    // mov edx, [ebp-0x10]
    size_t flag_store = 343;   // mov [eax*8+0x804a01c], edx
    size_t counter_load2 = 350;
    size_t counter_inc = 353;
    size_t counter_cmp = 356;  // cmp dword [ebp-0xc], 2
    size_t embedded_branch = 357; // decodes inside counter_cmp
    size_t loop_branch = 360;  // jle back to counter_load
    size_t tail_load = 362;    // mov eax, [0x804a028]
    size_t epilogue_leave = 367;
    size_t epilogue_ret = 368;
    size_t end = 369;

    size_t frame2_entry = 376; // two-push frame function
    size_t frame2_store = 383; // mov dword [ebp-0x20], 42
    size_t text_size = 400;

    uint32_t text_vaddr = 0x8049000;
    uint32_t rodata_vaddr = 0x804a000; // 16 bytes
    uint32_t data_vaddr = 0x804a010;   // 32 bytes
    uint32_t bss_vaddr = 0x804a030;    // 16 bytes
};

// The main fixture: a loop walking a 3-element global array, with DWARF for
// two locals and three globals, built to the layout above.
ByteVec make_loop_fixture_elf();

// A binary with exactly two function symbols at 0x8049310 / 0x8049400.
ByteVec make_two_entry_elf();

// .plt stub plus a real function; the stub symbol must not be an entry.
ByteVec make_plt_elf();

ByteVec make_stripped_elf();
ByteVec make_empty_text_elf();
ByteVec make_elf64_stub();

// Deterministic multi-function program for training runs. `nfuncs` small
// frame functions with DWARF locals and global accesses.
ByteVec make_program_elf(uint64_t seed, int nfuncs, const std::string& cu_name);

// Writes the full fixture set into dir: loop fixture, loaders' edge cases
// and a three-binary training corpus. Returns the file names written.
std::vector<std::string> write_fixture_dir(const std::string& dir);

} // namespace bindis::synth
