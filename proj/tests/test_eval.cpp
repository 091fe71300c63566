// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <random>

#include "bindis/eval.hpp"

using namespace bindis;

namespace {

// Quadratic reference for the binary counts, kept independent of prf1's loop.
MetricReport counts_reference(const Verdicts& v) {
    int64_t tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < v.predicted.size(); ++i) {
        if (v.truth[i] == Truth::Pad || v.truth[i] == Truth::Unknown)
            continue;
        if (v.predicted[i] && v.truth[i] == Truth::Positive)
            ++tp;
        if (v.predicted[i] && v.truth[i] == Truth::Negative)
            ++fp;
        if (!v.predicted[i] && v.truth[i] == Truth::Positive)
            ++fn;
    }
    return make_report(tp, fp, fn);
}

} // namespace

TEST_SUITE_BEGIN("eval");

TEST_CASE("report ratios follow the standard formulas") {
    auto r = make_report(3, 1, 1);
    CHECK(r.precision == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(r.recall == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(r.f1 == doctest::Approx(0.75).epsilon(1e-12));

    auto perfect = make_report(5, 0, 0);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);

    auto empty_pred = make_report(0, 0, 4);
    CHECK(empty_pred.precision == 0.0);
    CHECK(empty_pred.recall == 0.0);
    CHECK(empty_pred.f1 == 0.0);

    auto nothing = make_report(0, 0, 0);
    CHECK(nothing.f1 == 0.0);
}

TEST_CASE("prf1 counts only classified positions") {
    Verdicts v;
    v.predicted = {1, 1, 0, 0, 1, 0, 1, 0};
    v.truth = {Truth::Positive, Truth::Negative, Truth::Positive, Truth::Negative,
               Truth::Pad,      Truth::Pad,      Truth::Unknown,  Truth::Unknown};
    auto r = prf1(v);
    CHECK(r.tp == 1);
    CHECK(r.fp == 1);
    CHECK(r.fn == 1);
    CHECK(r.precision == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.recall == doctest::Approx(0.5).epsilon(1e-12));

    Verdicts bad;
    bad.predicted = {1};
    CHECK_THROWS_AS(prf1(bad), Error);
}

TEST_CASE("prf1 is permutation-invariant over positions") {
    std::mt19937_64 rng(7);
    for (int round = 0; round < 20; ++round) {
        Verdicts v;
        const size_t n = 30 + uniform_below(rng, 40);
        for (size_t i = 0; i < n; ++i) {
            v.predicted.push_back(static_cast<int8_t>(uniform_below(rng, 2)));
            v.truth.push_back(static_cast<Truth>(uniform_below(rng, 4)));
        }
        auto base = prf1(v);
        CHECK(base.tp == counts_reference(v).tp);

        std::vector<size_t> perm(n);
        for (size_t i = 0; i < n; ++i)
            perm[i] = i;
        std::shuffle(perm.begin(), perm.end(), rng);
        Verdicts shuffled;
        for (size_t i : perm) {
            shuffled.predicted.push_back(v.predicted[i]);
            shuffled.truth.push_back(v.truth[i]);
        }
        auto r = prf1(shuffled);
        CHECK(r.tp == base.tp);
        CHECK(r.fp == base.fp);
        CHECK(r.fn == base.fn);
    }
}

TEST_CASE("incomplete ground truth applies the slot and overlap rules") {
    // Two true instructions separated by unreached slots; predictions around
    // them exercise each verdict.
    std::vector<ByteInterval> trues = {{10, 4}, {30, 5}};
    std::vector<ByteInterval> slots = {{0, 8}, {20, 8}};
    std::vector<PredictedInstr> preds = {
        {2, 3, true},   // fully inside the first slot: excluded
        {16, 3, true},  // reached gap, touches nothing: FP
        {10, 4, false}, // negative on a true instruction: FN
        {30, 5, true},  // positive on a true instruction: TP
        {22, 4, false}, // negative inside a slot: excluded
        {17, 2, false}, // negative on a reached non-instruction byte: ignored
    };
    auto r = eval_incomplete(preds, trues, slots);
    CHECK(r.tp == 1);
    CHECK(r.fp == 1);
    CHECK(r.fn == 1);
    CHECK(r.precision == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.recall == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("prediction straddling a slot edge is still counted") {
    // The instruction starts inside the slot but runs past its end, so it is
    // not fully contained and must be scored, not excluded.
    std::vector<ByteInterval> trues = {{8, 2}};
    std::vector<ByteInterval> slots = {{0, 6}};
    std::vector<PredictedInstr> preds = {{4, 4, true}};
    auto r = eval_incomplete(preds, trues, slots);
    CHECK(r.tp == 0);
    CHECK(r.fp == 1);
}

TEST_CASE("everything unknown yields the empty report") {
    std::vector<ByteInterval> slots = {{0, 64}};
    std::vector<PredictedInstr> preds = {{0, 4, true}, {10, 2, false}, {60, 4, true}};
    auto r = eval_incomplete(preds, {}, slots);
    CHECK(r.tp == 0);
    CHECK(r.fp == 0);
    CHECK(r.fn == 0);
    CHECK(r.f1 == 0.0);
}

TEST_CASE("incomplete scoring with no slots equals prf1 on the same verdicts") {
    std::mt19937_64 rng(1234);
    for (int round = 0; round < 50; ++round) {
        const int64_t span = 80;
        // Lay down non-overlapping true instructions.
        std::vector<ByteInterval> trues;
        int64_t cursor = static_cast<int64_t>(uniform_below(rng, 4));
        while (cursor < span - 6) {
            int64_t len = 1 + static_cast<int64_t>(uniform_below(rng, 5));
            trues.push_back({cursor, len});
            cursor += len + static_cast<int64_t>(uniform_below(rng, 4));
        }
        // A prediction at every byte with a random verdict and length.
        std::vector<PredictedInstr> preds;
        for (int64_t b = 0; b < span; ++b)
            preds.push_back({b, 1 + static_cast<int64_t>(uniform_below(rng, 6)),
                             uniform_below(rng, 2) == 1});

        Verdicts v;
        for (const auto& p : preds) {
            v.predicted.push_back(p.positive ? 1 : 0);
            bool starts = false;
            for (const auto& t : trues)
                starts = starts || t.offset == p.offset;
            v.truth.push_back(starts ? Truth::Positive : Truth::Negative);
        }

        auto a = eval_incomplete(preds, trues, {});
        auto b = prf1(v);
        CHECK(a.tp == b.tp);
        CHECK(a.fp == b.fp);
        CHECK(a.fn == b.fn);
        CHECK(a.f1 == b.f1);
    }
}

TEST_CASE("incomplete scoring rejects slots that cover true instructions") {
    std::vector<ByteInterval> trues = {{10, 4}};
    std::vector<ByteInterval> slots = {{12, 8}};
    CHECK_THROWS_AS(eval_incomplete({}, trues, slots), Error);
}

TEST_CASE("boundary comparison counts (key, offset) pairs") {
    MemBlockSet truth;
    truth.boundaries["data"] = {8, 16};
    truth.boundaries["discard_moves"] = {-16};

    MemBlockSet pred;
    pred.boundaries["data"] = {8, 16, 24};
    pred.boundaries["discard_moves"] = {-16};

    auto r = boundary_prf1(pred, truth);
    CHECK(r.overall.tp == 3);
    CHECK(r.overall.fp == 1);
    CHECK(r.overall.fn == 0);
    CHECK(r.global.tp == 2);
    CHECK(r.global.fp == 1);
    CHECK(r.stack.tp == 1);
    CHECK(r.stack.fp == 0);
    CHECK(r.stack.f1 == 1.0);

    auto same = boundary_prf1(truth, truth);
    CHECK(same.overall.f1 == 1.0);
    CHECK(same.global.f1 == 1.0);
    CHECK(same.stack.f1 == 1.0);

    auto none = boundary_prf1(MemBlockSet{}, truth);
    CHECK(none.overall.recall == 0.0);
    CHECK(none.overall.fn == 3);
}

TEST_CASE("boundary comparison is symmetric with precision and recall swapped") {
    std::mt19937_64 rng(99);
    const char* keys[] = {"data", "bss", "rodata", "alpha_fn", "beta_fn"};
    for (int round = 0; round < 20; ++round) {
        MemBlockSet a, b;
        for (const char* k : keys) {
            for (int i = 0; i < 6; ++i) {
                if (uniform_below(rng, 2))
                    a.boundaries[k].insert(static_cast<int64_t>(uniform_below(rng, 40)) - 20);
                if (uniform_below(rng, 2))
                    b.boundaries[k].insert(static_cast<int64_t>(uniform_below(rng, 40)) - 20);
            }
        }
        auto ab = boundary_prf1(a, b);
        auto ba = boundary_prf1(b, a);
        CHECK(ab.overall.tp == ba.overall.tp);
        CHECK(ab.overall.fp == ba.overall.fn);
        CHECK(ab.overall.fn == ba.overall.fp);
        CHECK(ab.overall.precision == ba.overall.recall);
        CHECK(ab.overall.recall == ba.overall.precision);
        CHECK(ab.overall.f1 == doctest::Approx(ba.overall.f1).epsilon(1e-15));
    }
}

TEST_CASE("average callsite recall follows the per-site formula") {
    std::vector<CallsiteTargets> sites(2);
    sites[0].observed = {100, 200};
    sites[0].predicted = {100, 200, 300};
    sites[1].observed = {400, 500};
    sites[1].predicted = {400};
    CHECK(recall_rc(sites) == doctest::Approx(0.75).epsilon(1e-12));

    // Every observed target predicted.
    sites[1].predicted = {400, 500};
    CHECK(recall_rc(sites) == doctest::Approx(1.0).epsilon(1e-12));

    // A site with no observed targets is excluded from the average.
    sites.push_back(CallsiteTargets{{1, 2, 3}, {}});
    CHECK(recall_rc(sites) == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(recall_rc({}), EmptyCallsiteListError);
    std::vector<CallsiteTargets> all_empty(3);
    all_empty[0].predicted = {7};
    CHECK_THROWS_AS(recall_rc(all_empty), EmptyCallsiteListError);
}

TEST_CASE("average callsite recall stays within the unit interval") {
    std::mt19937_64 rng(31);
    for (int round = 0; round < 30; ++round) {
        std::vector<CallsiteTargets> sites(1 + uniform_below(rng, 5));
        for (auto& s : sites) {
            for (int i = 0; i < 5; ++i) {
                if (uniform_below(rng, 2))
                    s.predicted.insert(static_cast<uint32_t>(uniform_below(rng, 10)));
                if (uniform_below(rng, 2))
                    s.observed.insert(static_cast<uint32_t>(uniform_below(rng, 10)));
            }
        }
        bool any_observed = false;
        for (const auto& s : sites)
            any_observed = any_observed || !s.observed.empty();
        if (!any_observed) {
            CHECK_THROWS_AS(recall_rc(sites), EmptyCallsiteListError);
            continue;
        }
        double rc = recall_rc(sites);
        CHECK(rc >= 0.0);
        CHECK(rc <= 1.0);
    }
}

TEST_CASE("aict is the exact mean of set sizes") {
    std::vector<std::set<uint32_t>> sets = {{1, 2}, {3, 4, 5, 6}};
    CHECK(aict(sets) == 3.0);

    std::vector<std::set<uint32_t>> singles = {{1}, {9}, {4}};
    CHECK(aict(singles) == 1.0);

    std::vector<std::set<uint32_t>> triples = {{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
    CHECK(aict(triples) == 3.0);

    CHECK_THROWS_AS(aict({}), EmptyCallsiteListError);
}

TEST_SUITE_END();
