// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "bindis/artifacts.hpp"
#include "bindis/elf.hpp"
#include "bindis/groundtruth.hpp"
#include "bindis/synth.hpp"

using namespace bindis;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name)
        : path((std::filesystem::temp_directory_path() / name).string()) {}
    ~TempFile() { std::remove(path.c_str()); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

} // namespace

TEST_SUITE_BEGIN("artifacts");

TEST_CASE("ground truth artifact round trips") {
    TempFile f("bindis_gt_rt.json");
    GroundTruthArtifact gt;
    gt.kind = "gt_entries";
    gt.binary_id = "sample";
    gt.positives = {0, 64, 313};
    gt.pad_nops = {60, 61, 62, 63};
    write_ground_truth(f.path, gt);

    auto back = read_ground_truth(f.path, "gt_entries");
    CHECK(back.kind == gt.kind);
    CHECK(back.binary_id == gt.binary_id);
    CHECK(back.positives == gt.positives);
    CHECK(back.pad_nops == gt.pad_nops);

    CHECK_THROWS_AS(read_ground_truth(f.path, "gt_instrs"), SchemaMismatchError);
    CHECK_THROWS_AS(read_ground_truth("/nonexistent/gt.json", "gt_entries"),
                    MissingInputError);
}

TEST_CASE("damaged artifacts are rejected as schema mismatches") {
    TempFile f("bindis_gt_bad.json");

    spit(f.path, "not json at all");
    CHECK_THROWS_AS(read_ground_truth(f.path, "gt_entries"), SchemaMismatchError);

    spit(f.path, R"({"schema_version":99,"kind":"gt_entries","binary":"x",)"
                 R"("positives":[],"pad_nops":[]})");
    CHECK_THROWS_AS(read_ground_truth(f.path, "gt_entries"), SchemaMismatchError);

    spit(f.path, R"({"schema_version":1,"kind":"gt_entries","binary":"x"})");
    CHECK_THROWS_AS(read_ground_truth(f.path, "gt_entries"), SchemaMismatchError);

    // A dataset whose record length disagrees with its header.
    TempFile d("bindis_ds_bad.jsonl");
    spit(d.path,
         "{\"schema_version\":1,\"kind\":\"dataset\",\"task\":\"t1\",\"L\":4,"
         "\"vocab_hash\":1,\"sequences\":1}\n"
         "{\"binary\":\"x\",\"first_offset\":0,\"fields\":[[1,2],[1,2],[1,2]],"
         "\"offsets\":[0,1],\"labels\":[0,1]}\n");
    CHECK_THROWS_AS(read_dataset(d.path), SchemaMismatchError);
}

TEST_CASE("blocks artifact round trips") {
    TempFile f("bindis_blocks_rt.json");
    BlocksArtifact b;
    b.kind = "gt_blocks";
    b.binary_id = "sample";
    b.blocks.boundaries["data"] = {8, 16, 24};
    b.blocks.boundaries["discard_moves"] = {-16, -20};
    b.rendered = render_mem_blocks(b.blocks);
    b.skipped = 2;
    write_blocks_artifact(f.path, b);

    auto back = read_blocks_artifact(f.path, "gt_blocks");
    CHECK(back.binary_id == b.binary_id);
    CHECK(back.blocks.boundaries == b.blocks.boundaries);
    CHECK(back.rendered == b.rendered);
    CHECK(back.skipped == b.skipped);
    CHECK_THROWS_AS(read_blocks_artifact(f.path, "memblocks"), SchemaMismatchError);
}

TEST_CASE("dataset artifact round trips sequences from a real binary") {
    auto bytes = synth::make_loop_fixture_elf();
    auto img = load_elf_bytes(bytes, "loop_fixture.elf");
    auto listing = superset_disassemble(img.code);
    auto sweep = linear_sweep_ground_truth(img);

    for (Task task : {Task::T1, Task::T3}) {
        DatasetConfig cfg;
        cfg.task = task;
        auto seqs = build_sequences(listing, cfg, img.regions, "loop_fixture");
        TaskLabels labels;
        labels.pad_nops = sweep.nop_offsets;
        std::set<size_t> positives(sweep.offsets.begin(), sweep.offsets.end());
        labels.entries = positives;
        labels.true_instrs = positives;
        labels.brel_instrs = positives;
        seqs = label_sequences(std::move(seqs), labels, task);

        DatasetArtifact ds;
        ds.task = task;
        ds.L = cfg.L;
        ds.vocab_hash = cfg.vocab.hash();
        ds.sequences = seqs;

        TempFile f("bindis_ds_rt.jsonl");
        write_dataset(f.path, ds);
        auto back = read_dataset(f.path);

        CHECK(back.task == task);
        CHECK(back.L == ds.L);
        CHECK(back.vocab_hash == ds.vocab_hash);
        REQUIRE(back.sequences.size() == seqs.size());
        for (size_t i = 0; i < seqs.size(); ++i) {
            CHECK(back.sequences[i].binary_id == seqs[i].binary_id);
            CHECK(back.sequences[i].first_offset == seqs[i].first_offset);
            CHECK(back.sequences[i].fields == seqs[i].fields);
            CHECK(back.sequences[i].offsets == seqs[i].offsets);
            CHECK(back.sequences[i].labels == seqs[i].labels);
        }

        // Writing the same content twice gives identical bytes.
        TempFile g("bindis_ds_rt2.jsonl");
        write_dataset(g.path, ds);
        CHECK(slurp(f.path) == slurp(g.path));
    }
}

TEST_CASE("predictions artifact round trips doubles exactly") {
    TempFile f("bindis_pred_rt.jsonl");
    PredictionsArtifact p;
    p.task = Task::T3;
    p.binary_id = "sample";
    p.threshold = 0.25;
    p.vocab_hash = 0xdeadbeefcafef00dull;
    p.preds = {{0, 0.1234567890123456789, false},
               {7, 1.0 / 3.0, false},
               {313, 0.9999999999999999, true}};
    write_predictions(f.path, p);

    auto back = read_predictions(f.path);
    CHECK(back.task == p.task);
    CHECK(back.binary_id == p.binary_id);
    CHECK(back.threshold == p.threshold);
    CHECK(back.vocab_hash == p.vocab_hash);
    REQUIRE(back.preds.size() == p.preds.size());
    for (size_t i = 0; i < p.preds.size(); ++i) {
        CHECK(back.preds[i].offset == p.preds[i].offset);
        CHECK(back.preds[i].p1 == p.preds[i].p1); // bit-exact round trip
        CHECK(back.preds[i].positive == p.preds[i].positive);
    }
}

TEST_CASE("superset artifact lists exactly the decoded offsets") {
    auto bytes = synth::make_loop_fixture_elf();
    auto img = load_elf_bytes(bytes, "loop_fixture.elf");
    auto listing = superset_disassemble(img.code);

    TempFile f("bindis_superset.jsonl");
    write_superset(f.path, "loop_fixture", listing);

    std::ifstream in(f.path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line.find("\"kind\":\"superset\"") != std::string::npos);
    CHECK(line.find("\"schema_version\":1") != std::string::npos);
    size_t records = 0;
    while (std::getline(in, line))
        if (!line.empty())
            ++records;
    CHECK(records == listing.num_instrs);
}

TEST_CASE("report artifact writes deterministically") {
    ReportArtifact r;
    r.binary_id = "sample";
    r.task = "t1";
    r.task_metrics = make_report(3, 1, 1);
    BoundaryReport b;
    b.overall = make_report(5, 0, 2);
    b.global = make_report(3, 0, 1);
    b.stack = make_report(2, 0, 1);
    r.boundary = b;

    TempFile f1("bindis_report1.json");
    TempFile f2("bindis_report2.json");
    write_report(f1.path, r);
    write_report(f2.path, r);
    auto text = slurp(f1.path);
    CHECK(text == slurp(f2.path));
    CHECK(text.find("\"precision\": 0.75") != std::string::npos);
    CHECK(text.find("\"kind\": \"report\"") != std::string::npos);
}

TEST_SUITE_END();
