// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "bindis/nn/model.hpp"

using namespace bindis;
using nn::MatX;

namespace {

nn::ModelConfig check_cfg() {
    nn::ModelConfig cfg;
    cfg.d_model = 12;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.ffn_dim = 24;
    cfg.L = 8;
    cfg.field_dims = {4, 4, 4};
    cfg.vocab_size = 60;
    cfg.seed = 21;
    return cfg;
}

} // namespace

TEST_SUITE_BEGIN("gradcheck");

TEST_CASE("analytic gradients match central finite differences") {
    double err = nn::grad_check(check_cfg(), nn::LossConfig{0.75, 2.0}, 250,
                                1e-5, 7);
    CHECK(err <= 1e-3);
}

TEST_CASE("gradcheck holds for plain cross-entropy and gamma 1") {
    CHECK(nn::grad_check(check_cfg(), nn::LossConfig{0.5, 0.0}, 120, 1e-5,
                         13) <= 1e-3);
    CHECK(nn::grad_check(check_cfg(), nn::LossConfig{0.6, 1.0}, 120, 1e-5,
                         17) <= 1e-3);
}

TEST_CASE("gradcheck is pure: parameters are restored after perturbation") {
    auto cfg = check_cfg();
    auto params = nn::ModelParameters<double>::init(cfg);
    auto before = params; // value copy
    nn::grad_check(cfg, nn::LossConfig{}, 60, 1e-5, 5);
    auto ta = params.tensors();
    auto tb = before.tensors();
    for (size_t i = 0; i < ta.size(); ++i)
        CHECK(*ta[i].second == *tb[i].second);
}

TEST_CASE("zero-gamma focal gradient equals alpha-scaled cross-entropy") {
    auto cfg = check_cfg();
    auto params = nn::ModelParameters<double>::init(cfg);
    std::mt19937_64 rng(3);
    std::vector<std::vector<int32_t>> ids(
        3, std::vector<int32_t>(8));
    for (auto& f : ids)
        for (auto& id : f)
            id = static_cast<int32_t>(rng() % 60);
    std::vector<char> mask(8, 1);
    std::vector<int8_t> labels{kLabelPos, kLabelNeg, kLabelPos, kLabelNeg,
                               kLabelPos, kLabelNeg, kLabelPad, kLabelPad};

    nn::ForwardCache<double> cache;
    nn::forward_sequence(ids, mask, params, cfg, cache);
    auto lg = nn::focal_loss_grad(cache, labels, nn::LossConfig{0.3, 0.0});

    // Reference: alpha_t * (p - onehot) per non-pad row.
    for (int t = 0; t < 8; ++t) {
        int8_t lab = labels[static_cast<size_t>(t)];
        if (lab == kLabelPad) {
            CHECK(lg.dlogits(t, 0) == 0.0);
            CHECK(lg.dlogits(t, 1) == 0.0);
            continue;
        }
        int y = lab == kLabelPos ? 1 : 0;
        double at = y == 1 ? 0.3 : 0.7;
        for (int k = 0; k < 2; ++k) {
            double want = at * (cache.probs(t, k) - (k == y ? 1.0 : 0.0));
            CHECK(lg.dlogits(t, k) == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_SUITE_END();
