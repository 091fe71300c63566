// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
#include "bindis/eval.hpp"

#include <algorithm>

#include "bindis/regions.hpp"

namespace bindis {

namespace {

bool intervals_overlap(const ByteInterval& a, const ByteInterval& b) {
    return a.offset < b.offset + b.length && b.offset < a.offset + a.length;
}

bool inside(const ByteInterval& inner, const ByteInterval& outer) {
    return inner.offset >= outer.offset &&
           inner.offset + inner.length <= outer.offset + outer.length;
}

MetricReport set_prf1(const std::set<std::pair<std::string, int64_t>>& pred,
                      const std::set<std::pair<std::string, int64_t>>& truth) {
    int64_t tp = 0;
    for (const auto& p : pred)
        tp += truth.count(p) ? 1 : 0;
    return make_report(tp, static_cast<int64_t>(pred.size()) - tp,
                       static_cast<int64_t>(truth.size()) - tp);
}

} // namespace

MetricReport make_report(int64_t tp, int64_t fp, int64_t fn) {
    MetricReport r;
    r.tp = tp;
    r.fp = fp;
    r.fn = fn;
    if (tp + fp > 0)
        r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0)
        r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (r.precision + r.recall > 0.0)
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

MetricReport prf1(const Verdicts& v) {
    if (v.predicted.size() != v.truth.size())
        throw Error("prf1: predicted and truth differ in length");
    int64_t tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < v.predicted.size(); ++i) {
        const Truth t = v.truth[i];
        if (t == Truth::Pad || t == Truth::Unknown)
            continue;
        const bool pos = v.predicted[i] != 0;
        const bool is_true = t == Truth::Positive;
        if (pos && is_true)
            ++tp;
        else if (pos)
            ++fp;
        else if (is_true)
            ++fn;
    }
    return make_report(tp, fp, fn);
}

MetricReport eval_incomplete(const std::vector<PredictedInstr>& preds,
                             const std::vector<ByteInterval>& true_instrs,
                             const std::vector<ByteInterval>& unknown_slots) {
    for (const auto& t : true_instrs)
        for (const auto& u : unknown_slots)
            if (intervals_overlap(t, u))
                throw Error("eval_incomplete: true instruction overlaps an unknown slot");

    std::set<int64_t> true_starts;
    for (const auto& t : true_instrs)
        true_starts.insert(t.offset);

    int64_t tp = 0, fp = 0, fn = 0;
    for (const auto& p : preds) {
        const ByteInterval extent{p.offset, p.length};
        bool excluded = false;
        for (const auto& u : unknown_slots) {
            if (inside(extent, u)) {
                excluded = true;
                break;
            }
        }
        if (excluded)
            continue;
        const bool on_true_start = true_starts.count(p.offset) != 0;
        if (p.positive && on_true_start)
            ++tp;
        else if (p.positive)
            ++fp;
        else if (on_true_start)
            ++fn;
    }
    return make_report(tp, fp, fn);
}

BoundaryReport boundary_prf1(const MemBlockSet& predicted, const MemBlockSet& truth) {
    std::set<std::pair<std::string, int64_t>> pred_all, truth_all;
    std::set<std::pair<std::string, int64_t>> pred_glb, truth_glb;
    std::set<std::pair<std::string, int64_t>> pred_stk, truth_stk;

    auto split = [](const MemBlockSet& blocks,
                    std::set<std::pair<std::string, int64_t>>& all,
                    std::set<std::pair<std::string, int64_t>>& glb,
                    std::set<std::pair<std::string, int64_t>>& stk) {
        for (const auto& [key, offs] : blocks.boundaries) {
            const bool is_global = rgn_from_name(key).has_value();
            for (int64_t off : offs) {
                all.emplace(key, off);
                if (is_global)
                    glb.emplace(key, off);
                else
                    stk.emplace(key, off);
            }
        }
    };
    split(predicted, pred_all, pred_glb, pred_stk);
    split(truth, truth_all, truth_glb, truth_stk);

    BoundaryReport r;
    r.overall = set_prf1(pred_all, truth_all);
    r.global = set_prf1(pred_glb, truth_glb);
    r.stack = set_prf1(pred_stk, truth_stk);
    return r;
}

double recall_rc(const std::vector<CallsiteTargets>& sites) {
    double sum = 0.0;
    int64_t counted = 0;
    for (const auto& s : sites) {
        if (s.observed.empty())
            continue;
        int64_t hit = 0;
        for (uint32_t t : s.observed)
            hit += s.predicted.count(t) ? 1 : 0;
        sum += static_cast<double>(hit) / static_cast<double>(s.observed.size());
        ++counted;
    }
    if (counted == 0)
        throw EmptyCallsiteListError("recall_rc: no callsite with observed targets");
    return sum / static_cast<double>(counted);
}

double aict(const std::vector<std::set<uint32_t>>& predicted) {
    if (predicted.empty())
        throw EmptyCallsiteListError("aict: empty callsite list");
    double sum = 0.0;
    for (const auto& s : predicted)
        sum += static_cast<double>(s.size());
    return sum / static_cast<double>(predicted.size());
}

} // namespace bindis
