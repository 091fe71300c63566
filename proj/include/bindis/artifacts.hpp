// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Inter-stage artifact files. Everything is JSON or JSONL with an embedded
// schema version; token-bearing artifacts also embed the vocabulary hash so
// stale artifact combinations fail fast instead of silently mismatching.
#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bindis/dataset.hpp"
#include "bindis/decoder.hpp"
#include "bindis/eval.hpp"
#include "bindis/vsa.hpp"

namespace bindis {

constexpr int kArtifactSchemaVersion = 1;

// Positive-offset ground truth for one binary and task, plus the NOP
// padding offsets that are excluded from every task's loss.
struct GroundTruthArtifact {
    std::string kind; // "gt_entries", "gt_instrs" or "gt_brel"
    std::string binary_id;
    std::set<size_t> positives;
    std::set<size_t> pad_nops;
};

void write_ground_truth(const std::string& path, const GroundTruthArtifact& gt);
GroundTruthArtifact read_ground_truth(const std::string& path,
                                      const std::string& expected_kind);

// Memory-block boundaries, either DWARF ground truth ("gt_blocks") or the
// output of boundary recovery ("memblocks").
struct BlocksArtifact {
    std::string kind;
    std::string binary_id;
    MemBlockSet blocks;
    std::string rendered; // boundary notation, informational
    size_t skipped = 0;   // variables dropped during ground-truth extraction
};

void write_blocks_artifact(const std::string& path, const BlocksArtifact& b);
BlocksArtifact read_blocks_artifact(const std::string& path,
                                    const std::string& expected_kind);

// Labeled token sequences. JSONL: one header line, one line per sequence.
struct DatasetArtifact {
    Task task = Task::T1;
    size_t L = 512;
    uint64_t vocab_hash = 0;
    std::vector<TokenSequence> sequences;
};

void write_dataset(const std::string& path, const DatasetArtifact& ds);
DatasetArtifact read_dataset(const std::string& path);

// Per-instruction classifier verdicts. JSONL, same layout as datasets.
struct PredictionRecord {
    int64_t offset = 0;
    double p1 = 0.0;
    bool positive = false;
};

struct PredictionsArtifact {
    Task task = Task::T1;
    std::string binary_id;
    double threshold = 0.5;
    uint64_t vocab_hash = 0;
    std::vector<PredictionRecord> preds;
};

void write_predictions(const std::string& path, const PredictionsArtifact& p);
PredictionsArtifact read_predictions(const std::string& path);

// One record per successfully decoded superset offset.
void write_superset(const std::string& path, const std::string& binary_id,
                    const SupersetListing& listing);

// Metric report; either part may be absent depending on what was evaluated.
struct ReportArtifact {
    std::string binary_id;
    std::optional<std::string> task;
    std::optional<MetricReport> task_metrics;
    std::optional<BoundaryReport> boundary;
};

void write_report(const std::string& path, const ReportArtifact& r);

} // namespace bindis
