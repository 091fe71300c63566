// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "bindis/common.hpp"
#include "bindis/vsa.hpp"

namespace bindis {

// Truth of one classified position. Pad and Unknown positions never enter
// the TP/FP/FN counts.
enum class Truth : int8_t {
    Negative = 0,
    Positive = 1,
    Pad = 2,
    Unknown = 3,
};

struct MetricReport {
    int64_t tp = 0;
    int64_t fp = 0;
    int64_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Fills in precision/recall/f1 from the counts. Each ratio is 0 when its
// denominator is 0, including F1 at P = R = 0.
MetricReport make_report(int64_t tp, int64_t fp, int64_t fn);

// Per-position verdicts for one task: the classifier output and the ground
// truth at the same positions.
struct Verdicts {
    std::vector<int8_t> predicted; // 0 or 1
    std::vector<Truth> truth;      // same length as predicted
};

MetricReport prf1(const Verdicts& v);

// Half-open byte interval [offset, offset + length).
struct ByteInterval {
    int64_t offset = 0;
    int64_t length = 1;
};

// One superset instruction together with the classifier's verdict at its
// start byte.
struct PredictedInstr {
    int64_t offset = 0;
    int64_t length = 1;
    bool positive = false;
};

// Scoring against incomplete (runtime-trace) ground truth. `true_instrs`
// are the recorded true instructions; `unknown_slots` are byte ranges the
// trace never reached. Rules:
//   - a prediction whose instruction lies fully inside an unknown slot is
//     excluded from the counts;
//   - a positive at the start byte of a true instruction (which therefore
//     overlaps it by at least one byte) is a TP;
//   - any other counted positive is an FP, whether it overlaps a true
//     instruction mid-body or touches no instruction byte at all;
//   - a negative at the start byte of a true instruction is an FN.
// With no unknown slots this reduces exactly to prf1 over start-byte truth.
// Throws Error when true_instrs and unknown_slots overlap.
MetricReport eval_incomplete(const std::vector<PredictedInstr>& preds,
                             const std::vector<ByteInterval>& true_instrs,
                             const std::vector<ByteInterval>& unknown_slots);

// Boundary-set comparison over (key, offset) pairs, plus per-class splits.
// A key that names one of the fixed memory regions counts as a global data
// boundary; any other key is a function name, so a stack boundary.
struct BoundaryReport {
    MetricReport overall;
    MetricReport global;
    MetricReport stack;
};

BoundaryReport boundary_prf1(const MemBlockSet& predicted, const MemBlockSet& truth);

// Predicted and observed indirect-call target sets for one callsite.
struct CallsiteTargets {
    std::set<uint32_t> predicted;
    std::set<uint32_t> observed;
};

// Average per-callsite recall: mean over callsites of |pred ∩ obs| / |obs|.
// Callsites with an empty observed set are skipped; throws
// EmptyCallsiteListError when no callsite remains.
double recall_rc(const std::vector<CallsiteTargets>& sites);

// Mean cardinality of the predicted target sets. Throws
// EmptyCallsiteListError on an empty list.
double aict(const std::vector<std::set<uint32_t>>& predicted);

} // namespace bindis
