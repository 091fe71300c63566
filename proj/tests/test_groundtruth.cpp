// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "bindis/groundtruth.hpp"
#include "bindis/synth.hpp"

using namespace bindis;

namespace {

const synth::LoopFixtureLayout kLay{};

struct Fixture {
    BinaryImage img;
    SupersetListing listing;
    SweepResult sweep;
    std::vector<FunctionCFG> cfgs;

    Fixture() {
        img = load_elf_bytes(synth::make_loop_fixture_elf(), "loop.elf");
        listing = superset_disassemble({img.code.data(), img.code.size()});
        sweep = linear_sweep_ground_truth(img);
        cfgs = functions_from_symbols(img, listing, sweep);
    }

    const FunctionCFG& fn(const std::string& name) const {
        for (const auto& f : cfgs)
            if (f.name == name)
                return f;
        throw std::logic_error("missing function " + name);
    }
};

} // namespace

TEST_SUITE("groundtruth") {

TEST_CASE("linear sweep tiles each segment without gaps") {
    Fixture fx;
    REQUIRE(!fx.sweep.offsets.empty());
    CHECK(fx.sweep.offsets.front() == 0);
    for (size_t i = 0; i + 1 < fx.sweep.offsets.size(); ++i) {
        size_t off = fx.sweep.offsets[i];
        CHECK(off + fx.listing.slots[off]->length == fx.sweep.offsets[i + 1]);
    }
    size_t last = fx.sweep.offsets.back();
    CHECK(last + fx.listing.slots[last]->length == kLay.text_size);
}

TEST_CASE("inter-function padding is marked as NOPs") {
    Fixture fx;
    // bump_arg is 11 bytes, padded to 32 with single-byte NOPs.
    for (size_t off = 11; off < 32; ++off)
        CHECK(fx.sweep.nop_offsets.count(off) == 1);
    CHECK(fx.sweep.nop_offsets.count(0) == 0);
    CHECK(fx.sweep.nop_offsets.count(kLay.init_store) == 0);
}

TEST_CASE("sweep reports an undecodable byte as a gap") {
    BinaryImage img;
    img.code = {0xC3, 0x62, 0x90}; // 0x62 is outside the decoded subset
    img.exec_segments.push_back({0, 0x1000, 3});
    CHECK_THROWS_AS(linear_sweep_ground_truth(img), DecodeGapError);
}

TEST_CASE("sweep rejects an instruction crossing the segment end") {
    BinaryImage img;
    img.code = {0xB8, 0x01, 0x00, 0x00, 0x00}; // 5-byte mov eax, 1
    img.exec_segments.push_back({0, 0x1000, 2});
    CHECK_THROWS_AS(linear_sweep_ground_truth(img), DecodeGapError);
}

TEST_CASE("prologue deltas across the fixture shapes") {
    Fixture fx;
    auto info = [&](const char* name) {
        return prologue_delta(fx.fn(name), fx.listing);
    };

    auto bump = info("bump_arg"); // push ebp; mov ebp, esp
    CHECK(bump.kind == FrameKind::Ebp);
    CHECK(bump.delta_ebp == -4);
    CHECK(bump.delta_esp == -4);

    auto dbl = info("double_seven"); // + sub esp, 0x10
    CHECK(dbl.delta_ebp == -4);
    CHECK(dbl.delta_esp == -20);

    auto two = info("pick_second"); // push esi; push ebp; mov ebp, esp
    CHECK(two.kind == FrameKind::Ebp);
    CHECK(two.delta_ebp == -8);

    auto scratch = info("init_scratch"); // two pushes + sub esp, 0x20
    CHECK(scratch.delta_ebp == -8);
    CHECK(scratch.delta_esp == -40);

    auto leaf = info("zero"); // no frame setup at all
    CHECK(leaf.kind == FrameKind::Esp);
    CHECK(leaf.delta_esp == 0);

    auto caller = info("call_zero"); // starts with a call
    CHECK(caller.kind == FrameKind::Esp);
    CHECK(caller.delta_esp == 0);
}

TEST_CASE("dwarf globals become region-relative boundaries") {
    Fixture fx;
    auto blocks = ext_blk_bnd_dwarf(fx.img, fx.cfgs, fx.listing);
    CHECK(blocks.boundaries.at("rodata") == std::set<int64_t>{0});
    CHECK(blocks.boundaries.at("data") == std::set<int64_t>{0, 8});
    CHECK(blocks.boundaries.at("bss") == std::set<int64_t>{0});
}

TEST_CASE("frame variables normalise to initial-esp offsets") {
    Fixture fx;
    auto blocks = ext_blk_bnd_dwarf(fx.img, fx.cfgs, fx.listing);
    // i at ebp-12 and user_f at ebp-16 under a one-push frame.
    CHECK(blocks.boundaries.at("discard_moves") ==
          std::set<int64_t>{-20, -16});
    // Two pushes before mov ebp,esp and a variable at ebp-32.
    CHECK(blocks.boundaries.at("init_scratch") == std::set<int64_t>{-40});
    CHECK(blocks.skipped == 0);
    CHECK(fx.img.dwarf_skipped == 1); // alias_p has an opaque location
}

TEST_CASE("extents carry the block span implied by variable sizes") {
    Fixture fx;
    auto blocks = ext_blk_bnd_dwarf(fx.img, fx.cfgs, fx.listing);
    bool found_rules = false, found_scratch = false;
    for (const auto& e : blocks.extents) {
        if (e.var == "rules") {
            CHECK(e.key == "data");
            CHECK(e.start == 8);
            CHECK(e.end == 31);
            found_rules = true;
        }
        if (e.var == "scratch") {
            CHECK(e.key == "init_scratch");
            CHECK(e.start == -40);
            CHECK(e.end == -25);
            found_scratch = true;
        }
    }
    CHECK(found_rules);
    CHECK(found_scratch);
}

TEST_CASE("esp-frame variables use the esp delta") {
    // sub esp, 8; mov [esp], 1; add esp, 8; ret with s0 at esp+0.
    synth::Asm a;
    a.sub_ri(Reg::Esp, 8);
    a.mov_m_i32(synth::Mem::base_disp(Reg::Esp, 0), 1);
    a.add_ri(Reg::Esp, 8);
    a.ret();
    ByteVec text = a.take();

    synth::ElfBuilder eb;
    eb.add_progbits(".text", 0x8049000, text, synth::SectionFlags::AllocExec);
    eb.add_symbol("leafy", 0x8049000, static_cast<uint32_t>(text.size()),
                  SymbolKind::Function, ".text");
    synth::DwarfBuilder db("leaf.c");
    synth::DwarfBuilder::Func fn;
    fn.name = "leafy";
    fn.low_pc = 0x8049000;
    fn.size = static_cast<uint32_t>(text.size());
    synth::DwarfBuilder::Var v;
    v.name = "s0";
    v.byte_size = 8;
    v.breg = {FrameBase::Esp, 0};
    fn.vars.push_back(v);
    db.add_func(fn);
    auto dw = db.build();
    eb.add_progbits(".debug_info", 0, dw.debug_info,
                    synth::SectionFlags::None);
    eb.add_progbits(".debug_abbrev", 0, dw.debug_abbrev,
                    synth::SectionFlags::None);

    auto img = load_elf_bytes(eb.build(), "leaf.elf");
    auto blocks = ext_blk_bnd_dwarf(img);
    CHECK(blocks.boundaries.at("leafy") == std::set<int64_t>{-8});
}

TEST_CASE("images without dwarf raise MissingGroundTruth") {
    auto img = load_elf_bytes(synth::make_two_entry_elf(), "two.elf");
    REQUIRE(img.dwarf_vars.empty());
    CHECK_THROWS_AS(ext_blk_bnd_dwarf(img), MissingGroundTruthError);
}

TEST_CASE("convenience overload matches the explicit pipeline") {
    Fixture fx;
    auto a = ext_blk_bnd_dwarf(fx.img);
    auto b = ext_blk_bnd_dwarf(fx.img, fx.cfgs, fx.listing);
    CHECK(a.boundaries == b.boundaries);
    CHECK(a.skipped == b.skipped);
}

} // TEST_SUITE
