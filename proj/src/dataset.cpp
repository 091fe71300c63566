// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0

#include "bindis/dataset.hpp"

#include <algorithm>
#include <map>

#include "bindis/common.hpp"

namespace bindis {

const char* task_name(Task t) {
    switch (t) {
    case Task::T1: return "t1";
    case Task::T2: return "t2";
    case Task::T3: return "t3";
    }
    return "?";
}

std::optional<Task> task_from_name(const std::string& s) {
    if (s == "t1") return Task::T1;
    if (s == "t2") return Task::T2;
    if (s == "t3") return Task::T3;
    return std::nullopt;
}

size_t task_fields(Task t) { return t == Task::T3 ? 5 : 3; }

size_t TokenSequence::real_count() const {
    size_t n = 0;
    for (int64_t off : offsets)
        if (off >= 0)
            ++n;
    return n;
}

std::vector<TokenSequence> build_sequences(const SupersetListing& listing,
                                           const DatasetConfig& cfg,
                                           const RegionTable& regions,
                                           const std::string& binary_id) {
    const TokenVocab& v = cfg.vocab;
    const size_t nf = task_fields(cfg.task);

    // Tokenise the stream first; T3 drops instructions without a data or
    // control field tuple.
    std::vector<std::vector<int32_t>> toks; // one tuple per kept instruction
    std::vector<int64_t> offs;
    for (size_t off = 0; off < listing.slots.size(); ++off) {
        const auto& slot = listing.slots[off];
        if (!slot)
            continue;
        if (cfg.task == Task::T3) {
            auto d2 = decode2(*slot, regions, v);
            if (!d2)
                continue;
            toks.push_back({v.opcode_tok(d2->opcode_id), v.modrm_tok(d2->modrm_id),
                            v.sib_tok(d2->sib_id), v.rgn_tok(d2->rgn),
                            v.disp_tok(d2->disp_code)});
        } else {
            Decode1 d1 = decode1(*slot);
            toks.push_back({v.opcode_tok(d1.opcode_id), v.modrm_tok(d1.modrm_id),
                            v.sib_tok(d1.sib_id)});
        }
        offs.push_back(static_cast<int64_t>(off));
    }

    std::vector<TokenSequence> out;
    const size_t n = toks.size();
    for (size_t base = 0; base < n; base += cfg.L) {
        TokenSequence seq;
        seq.task = cfg.task;
        seq.binary_id = binary_id;
        seq.first_offset = static_cast<size_t>(offs[base]);
        seq.fields.assign(nf, std::vector<int32_t>(cfg.L, v.pad_id()));
        seq.offsets.assign(cfg.L, -1);
        seq.labels.assign(cfg.L, kLabelPad);
        size_t len = std::min(cfg.L, n - base);
        for (size_t p = 0; p < len; ++p) {
            for (size_t f = 0; f < nf; ++f)
                seq.fields[f][p] = toks[base + p][f];
            seq.offsets[p] = offs[base + p];
            seq.labels[p] = kLabelNeg;
        }
        out.push_back(std::move(seq));
    }
    return out;
}

std::vector<TokenSequence> label_sequences(std::vector<TokenSequence> seqs,
                                           const TaskLabels& gt, Task task) {
    const std::optional<std::set<size_t>>* pos = nullptr;
    switch (task) {
    case Task::T1: pos = &gt.entries; break;
    case Task::T2: pos = &gt.true_instrs; break;
    case Task::T3: pos = &gt.brel_instrs; break;
    }
    if (!pos->has_value())
        throw MissingGroundTruthError(std::string("no positive set for task ") +
                                      task_name(task));
    const std::set<size_t>& positives = **pos;

    for (TokenSequence& seq : seqs) {
        for (size_t p = 0; p < seq.length(); ++p) {
            if (seq.offsets[p] < 0)
                continue; // tail padding stays pad
            auto off = static_cast<size_t>(seq.offsets[p]);
            if (gt.pad_nops.count(off))
                seq.labels[p] = kLabelPad;
            else
                seq.labels[p] = positives.count(off) ? kLabelPos : kLabelNeg;
        }
    }
    return seqs;
}

std::vector<TokenSequence> dedup_sequences(std::vector<TokenSequence> seqs) {
    std::vector<TokenSequence> out;
    std::set<std::pair<std::vector<std::vector<int32_t>>, std::vector<int8_t>>>
        seen;
    for (TokenSequence& seq : seqs) {
        auto key = std::make_pair(seq.fields, seq.labels);
        if (seen.insert(std::move(key)).second)
            out.push_back(std::move(seq));
    }
    return out;
}

} // namespace bindis
