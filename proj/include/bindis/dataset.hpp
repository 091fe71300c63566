// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Fixed-length labeled token sequences built from superset listings. The
// entry and instruction tasks see every superset instruction as an
// (opcode, modrm, sib) triple; the boundary task first filters to
// memory-access and branching instructions and adds region and
// displacement fields.
#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bindis/decoder.hpp"
#include "bindis/fields.hpp"
#include "bindis/regions.hpp"

namespace bindis {

enum class Task : uint8_t { T1, T2, T3 };

const char* task_name(Task t);
std::optional<Task> task_from_name(const std::string& s);

// Number of token fields per position: triples for the entry and
// instruction tasks, quintuples for the boundary task.
size_t task_fields(Task t);

struct DatasetConfig {
    size_t L = 512;
    Task task = Task::T1;
    TokenVocab vocab;
};

constexpr int8_t kLabelNeg = 0;
constexpr int8_t kLabelPos = 1;
constexpr int8_t kLabelPad = -1;

// One model input: L positions, each a tuple of field ids. fields[f][p]
// is field f at position p; pad positions carry the vocab pad id in every
// field, label pad and offset -1. positions are always 0..L-1.
struct TokenSequence {
    Task task = Task::T1;
    std::string binary_id;
    size_t first_offset = 0; // code offset of the first real instruction
    std::vector<std::vector<int32_t>> fields;
    std::vector<int64_t> offsets; // code offset per position, -1 on pad
    std::vector<int8_t> labels;

    size_t length() const { return labels.size(); }
    size_t real_count() const; // positions that hold an instruction
};

// Ground truth positive sets per task; a task's set may be absent when the
// producing stage was not run. NOP padding instructions are labeled pad.
struct TaskLabels {
    std::optional<std::set<size_t>> entries;      // T1 positives
    std::optional<std::set<size_t>> true_instrs;  // T2 positives
    std::optional<std::set<size_t>> brel_instrs;  // T3 positives
    std::set<size_t> pad_nops;
};

// Chunk the (possibly filtered) instruction stream into ceil(N'/L)
// sequences; the tail is padded. Labels start out all pad on pad slots and
// 0 elsewhere.
std::vector<TokenSequence> build_sequences(const SupersetListing& listing,
                                           const DatasetConfig& cfg,
                                           const RegionTable& regions,
                                           const std::string& binary_id = "");

// Apply labels: 1 on the task's positive offsets, pad on NOP padding, 0
// otherwise. Throws MissingGroundTruthError when the task's positive set
// is absent; an empty set is valid and labels everything 0.
std::vector<TokenSequence> label_sequences(std::vector<TokenSequence> seqs,
                                           const TaskLabels& gt, Task task);

// Remove exact duplicates over (tokens, labels), keeping the first
// occurrence. Idempotent.
std::vector<TokenSequence> dedup_sequences(std::vector<TokenSequence> seqs);

} // namespace bindis
