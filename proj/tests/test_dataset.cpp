// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <random>

#include "bindis/dataset.hpp"
#include "bindis/groundtruth.hpp"
#include "bindis/synth.hpp"
#include "bindis/vsa.hpp"

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
};

DatasetConfig cfg_for(Task t, size_t L = 512) {
    DatasetConfig c;
    c.L = L;
    c.task = t;
    return c;
}

std::vector<int64_t> real_offsets(const std::vector<TokenSequence>& seqs) {
    std::vector<int64_t> out;
    for (const auto& s : seqs)
        for (int64_t off : s.offsets)
            if (off >= 0)
                out.push_back(off);
    return out;
}

// Reference dedup: quadratic pairwise comparison, first occurrence wins.
std::vector<TokenSequence> dedup_reference(const std::vector<TokenSequence>& seqs) {
    std::vector<TokenSequence> out;
    for (const auto& s : seqs) {
        bool dup = false;
        for (const auto& kept : out)
            if (kept.fields == s.fields && kept.labels == s.labels)
                dup = true;
        if (!dup)
            out.push_back(s);
    }
    return out;
}

bool same_keys(const std::vector<TokenSequence>& a,
               const std::vector<TokenSequence>& b) {
    if (a.size() != b.size())
        return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i].fields != b[i].fields || a[i].labels != b[i].labels ||
            a[i].first_offset != b[i].first_offset)
            return false;
    return true;
}

} // namespace

TEST_SUITE_BEGIN("dataset");

TEST_CASE("sequence count is ceil(N/L) and the tail is padded") {
    // 1000 one-byte instructions decode at every offset.
    ByteVec nops(1000, 0x90);
    auto listing = superset_disassemble({nops.data(), nops.size()});
    REQUIRE(listing.num_instrs == 1000);

    auto seqs = build_sequences(listing, cfg_for(Task::T1), {}, "nops");
    REQUIRE(seqs.size() == 2);
    CHECK(seqs[0].real_count() == 512);
    CHECK(seqs[1].real_count() == 488);

    TokenVocab vocab;
    size_t pads = 0;
    for (size_t p = 0; p < seqs[1].length(); ++p) {
        if (seqs[1].offsets[p] >= 0)
            continue;
        ++pads;
        CHECK(seqs[1].labels[p] == kLabelPad);
        for (const auto& field : seqs[1].fields)
            CHECK(field[p] == vocab.pad_id());
    }
    CHECK(pads == 24);
    CHECK(seqs[0].first_offset == 0);
    CHECK(seqs[1].first_offset == 512);
    CHECK(seqs[0].binary_id == "nops");
}

TEST_CASE("empty listing yields an empty dataset") {
    SupersetListing empty;
    CHECK(build_sequences(empty, cfg_for(Task::T1), {}).empty());
    CHECK(build_sequences(empty, cfg_for(Task::T3), {}).empty());
}

TEST_CASE("ceil law holds across stream lengths") {
    for (size_t n : {1u, 2u, 3u, 7u, 8u, 9u, 63u, 64u, 65u}) {
        ByteVec nops(n, 0x90);
        auto listing = superset_disassemble({nops.data(), nops.size()});
        auto seqs = build_sequences(listing, cfg_for(Task::T2, 8), {});
        CHECK(seqs.size() == (n + 7) / 8);
        for (const auto& s : seqs) {
            CHECK(s.length() == 8);
            CHECK(s.fields.size() == 3);
        }
    }
}

TEST_CASE("entry and instruction tasks keep every superset instruction in order") {
    Fixture fx;
    auto seqs = build_sequences(fx.listing, cfg_for(Task::T1), fx.img.regions);
    auto offs = real_offsets(seqs);
    REQUIRE(offs.size() == fx.listing.num_instrs);
    CHECK(std::is_sorted(offs.begin(), offs.end()));

    std::vector<int64_t> expect;
    for (size_t off = 0; off < fx.listing.slots.size(); ++off)
        if (fx.listing.slots[off])
            expect.push_back(static_cast<int64_t>(off));
    CHECK(offs == expect);
}

TEST_CASE("boundary task keeps only memory-access and branching instructions") {
    Fixture fx;
    auto seqs = build_sequences(fx.listing, cfg_for(Task::T3), fx.img.regions);
    auto offs = real_offsets(seqs);
    std::set<int64_t> kept(offs.begin(), offs.end());

    for (const auto& s : seqs)
        CHECK(s.fields.size() == 5);

    for (int64_t off : offs) {
        const auto& ins = *fx.listing.slots[static_cast<size_t>(off)];
        CHECK((ins.is_branch || ins.mem_operand() != nullptr));
    }

    // Loop body accesses and branches survive the filter.
    for (size_t off : {kLay.init_store, kLay.entry_jmp, kLay.counter_load,
                       kLay.rule_store, kLay.body_branch, kLay.flag_load,
                       kLay.flag_store, kLay.counter_load2, kLay.counter_inc,
                       kLay.counter_cmp, kLay.loop_branch, kLay.tail_load})
        CHECK(kept.count(static_cast<int64_t>(off)) == 1);

    // Overlapping decode inside the counter compare is a branch that is not
    // a true instruction; the superset keeps it.
    CHECK(kept.count(static_cast<int64_t>(kLay.counter_cmp) + 1) == 1);
    CHECK(!fx.sweep.nop_offsets.count(kLay.counter_cmp + 1));
    bool is_true = std::binary_search(fx.sweep.offsets.begin(),
                                      fx.sweep.offsets.end(),
                                      kLay.counter_cmp + 1);
    CHECK(!is_true);
    CHECK(fx.listing.slots[kLay.counter_cmp + 1]->is_cond_branch);

    // Register-only moves and pushes carry no tuple.
    CHECK(kept.count(static_cast<int64_t>(kLay.entry)) == 0);
    CHECK(kept.count(static_cast<int64_t>(kLay.entry) + 1) == 0);
}

TEST_CASE("boundary labels mark the block-boundary instructions") {
    Fixture fx;
    auto gt = ext_blk_bnd_dwarf(fx.img, fx.cfgs, fx.listing);

    TaskLabels labels;
    labels.pad_nops = fx.sweep.nop_offsets;
    labels.brel_instrs.emplace();
    for (const auto& fn : fx.cfgs) {
        auto vsa = func_wise_vsa(fn, fx.listing, fx.img.regions);
        auto brel = id_instr_touch_mem(fn, fx.listing, fx.img.regions, gt, vsa);
        labels.brel_instrs->insert(brel.instrs.begin(), brel.instrs.end());
    }

    auto seqs = label_sequences(
        build_sequences(fx.listing, cfg_for(Task::T3), fx.img.regions),
        labels, Task::T3);

    std::set<int64_t> pos, neg;
    for (const auto& s : seqs)
        for (size_t p = 0; p < s.length(); ++p) {
            if (s.offsets[p] < kLay.entry ||
                s.offsets[p] >= static_cast<int64_t>(kLay.frame2_entry))
                continue;
            (s.labels[p] == kLabelPos ? pos : neg).insert(s.offsets[p]);
        }
    CHECK(pos == std::set<int64_t>{
                     static_cast<int64_t>(kLay.init_store),
                     static_cast<int64_t>(kLay.counter_load),
                     static_cast<int64_t>(kLay.rule_store),
                     static_cast<int64_t>(kLay.flag_load),
                     static_cast<int64_t>(kLay.counter_load2),
                     static_cast<int64_t>(kLay.counter_inc),
                     static_cast<int64_t>(kLay.counter_cmp)});
    CHECK(neg.count(static_cast<int64_t>(kLay.flag_store)) == 1);
    CHECK(neg.count(static_cast<int64_t>(kLay.tail_load)) == 1);
}

TEST_CASE("entry labels hit exactly the symbol entry points") {
    Fixture fx;
    TaskLabels labels;
    labels.pad_nops = fx.sweep.nop_offsets;
    labels.entries.emplace();
    for (const auto& fn : fx.cfgs)
        labels.entries->insert(fn.entry);

    auto seqs = label_sequences(
        build_sequences(fx.listing, cfg_for(Task::T1), fx.img.regions),
        labels, Task::T1);

    std::set<int64_t> pos;
    for (const auto& s : seqs)
        for (size_t p = 0; p < s.length(); ++p) {
            CHECK((s.labels[p] != kLabelPos || s.offsets[p] >= 0));
            if (s.labels[p] == kLabelPos)
                pos.insert(s.offsets[p]);
            if (s.offsets[p] >= 0 &&
                labels.pad_nops.count(static_cast<size_t>(s.offsets[p])))
                CHECK(s.labels[p] == kLabelPad);
        }
    std::set<int64_t> want(labels.entries->begin(), labels.entries->end());
    CHECK(pos == want);
}

TEST_CASE("instruction labels follow the linear sweep with pad on padding") {
    Fixture fx;
    TaskLabels labels;
    labels.pad_nops = fx.sweep.nop_offsets;
    labels.true_instrs.emplace(fx.sweep.offsets.begin(), fx.sweep.offsets.end());

    auto seqs = label_sequences(
        build_sequences(fx.listing, cfg_for(Task::T2), fx.img.regions),
        labels, Task::T2);

    size_t pos = 0, pad_in_body = 0;
    for (const auto& s : seqs)
        for (size_t p = 0; p < s.length(); ++p) {
            if (s.offsets[p] < 0)
                continue;
            auto off = static_cast<size_t>(s.offsets[p]);
            if (fx.sweep.nop_offsets.count(off)) {
                CHECK(s.labels[p] == kLabelPad);
                ++pad_in_body;
            } else if (labels.true_instrs->count(off)) {
                CHECK(s.labels[p] == kLabelPos);
                ++pos;
            } else {
                CHECK(s.labels[p] == kLabelNeg);
            }
        }
    CHECK(pos == fx.sweep.offsets.size() - fx.sweep.nop_offsets.size());
    CHECK(pad_in_body == fx.sweep.nop_offsets.size());
}

TEST_CASE("empty positive set labels everything negative") {
    ByteVec nops(16, 0x90);
    auto listing = superset_disassemble({nops.data(), nops.size()});
    TaskLabels labels;
    labels.entries.emplace();
    auto seqs = label_sequences(build_sequences(listing, cfg_for(Task::T1, 8), {}),
                                labels, Task::T1);
    for (const auto& s : seqs)
        for (int8_t l : s.labels)
            CHECK(l == kLabelNeg);
}

TEST_CASE("labeling without the task's positive set refuses") {
    ByteVec nops(4, 0x90);
    auto listing = superset_disassemble({nops.data(), nops.size()});
    auto seqs = build_sequences(listing, cfg_for(Task::T1, 4), {});
    TaskLabels labels; // nothing populated
    CHECK_THROWS_AS(label_sequences(seqs, labels, Task::T1),
                    MissingGroundTruthError);
    labels.entries.emplace();
    CHECK_THROWS_AS(label_sequences(seqs, labels, Task::T3),
                    MissingGroundTruthError);
    CHECK_NOTHROW(label_sequences(seqs, labels, Task::T1));
}

TEST_CASE("dedup removes exact repeats and keeps first origins") {
    // A A B: two identical NOP pages then a page of rets.
    ByteVec bytes(8, 0x90);
    bytes.resize(12, 0xC3);
    auto listing = superset_disassemble({bytes.data(), bytes.size()});
    auto seqs = build_sequences(listing, cfg_for(Task::T1, 4), {});
    REQUIRE(seqs.size() == 3);
    REQUIRE(seqs[0].fields == seqs[1].fields);

    auto deduped = dedup_sequences(seqs);
    REQUIRE(deduped.size() == 2);
    CHECK(deduped[0].first_offset == 0);
    CHECK(deduped[1].first_offset == 8);

    auto again = dedup_sequences(deduped);
    CHECK(same_keys(again, deduped));
}

TEST_CASE("dedup keeps token twins whose labels differ") {
    ByteVec bytes(8, 0x90);
    auto listing = superset_disassemble({bytes.data(), bytes.size()});
    auto seqs = build_sequences(listing, cfg_for(Task::T1, 4), {});
    REQUIRE(seqs.size() == 2);
    seqs[1].labels[2] = kLabelPos;
    auto deduped = dedup_sequences(seqs);
    CHECK(deduped.size() == 2);
    CHECK(same_keys(deduped, dedup_reference(seqs)));
}

TEST_CASE("dedup matches the pairwise reference on shuffled batches") {
    Fixture fx;
    auto base = build_sequences(fx.listing, cfg_for(Task::T2, 16),
                                fx.img.regions);
    std::mt19937 rng(7);
    for (int round = 0; round < 5; ++round) {
        std::vector<TokenSequence> batch = base;
        batch.insert(batch.end(), base.begin(), base.end());
        std::shuffle(batch.begin(), batch.end(), rng);
        auto fast = dedup_sequences(batch);
        auto slow = dedup_reference(batch);
        CHECK(same_keys(fast, slow));
        CHECK(same_keys(dedup_sequences(fast), fast));
    }
}

TEST_CASE("task names round trip") {
    for (Task t : {Task::T1, Task::T2, Task::T3})
        CHECK(task_from_name(task_name(t)) == t);
    CHECK(!task_from_name("t4").has_value());
    CHECK(task_fields(Task::T1) == 3);
    CHECK(task_fields(Task::T3) == 5);
}

TEST_SUITE_END();
