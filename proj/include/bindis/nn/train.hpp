// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic single-threaded training loop: adaptive-moment updates
// with linear warmup, batch-mean focal loss, optional early stop on a
// training F1 target. Prediction and F1 evaluation share the forward pass.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "bindis/nn/model.hpp"

namespace bindis::nn {

struct TrainConfig {
    double lr = 1e-4;
    int batch_size = 16;
    int epochs = 1;
    int max_steps = 0; // 0: epochs decide
    double warmup_frac = 0.05;
    double dropout = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    uint64_t seed = 0;
    double target_f1 = 0.0; // early stop once training F1 reaches this
    int eval_every = 10;    // steps between early-stop evaluations
    double threshold = 0.5; // verdict threshold for evaluations
};

template <typename S>
struct TrainResult {
    ModelParameters<S> params;
    std::vector<double> loss_curve; // one entry per optimizer step
    int steps = 0;
    double train_f1 = -1.0; // last early-stop evaluation, -1 if none ran
};

template <typename S>
class AdamOptimizer {
public:
    AdamOptimizer(const ModelConfig& cfg, const TrainConfig& tc)
        : m_(ModelParameters<S>::shaped(cfg)), v_(ModelParameters<S>::shaped(cfg)),
          b1_(tc.beta1), b2_(tc.beta2), eps_(tc.adam_eps) {
        m_.set_zero();
        v_.set_zero();
    }

    void step(ModelParameters<S>& params, ModelParameters<S>& grads,
              double lr) {
        ++t_;
        const S bc1 = static_cast<S>(1.0 - std::pow(b1_, t_));
        const S bc2 = static_cast<S>(1.0 - std::pow(b2_, t_));
        auto pt = params.tensors();
        auto gt = grads.tensors();
        auto mt = m_.tensors();
        auto vt = v_.tensors();
        for (size_t i = 0; i < pt.size(); ++i) {
            auto& p = *pt[i].second;
            auto& g = *gt[i].second;
            auto& m = *mt[i].second;
            auto& v = *vt[i].second;
            m = static_cast<S>(b1_) * m + static_cast<S>(1.0 - b1_) * g;
            v.array() = static_cast<S>(b2_) * v.array() +
                        static_cast<S>(1.0 - b2_) * g.array().square();
            p.array() -= static_cast<S>(lr) * (m.array() / bc1) /
                         ((v.array() / bc2).sqrt() + static_cast<S>(eps_));
        }
    }

private:
    ModelParameters<S> m_, v_;
    double b1_, b2_, eps_;
    int t_ = 0;
};

namespace detail {

inline std::vector<char> attn_mask(const TokenSequence& seq) {
    std::vector<char> mask(seq.length());
    for (size_t t = 0; t < seq.length(); ++t)
        mask[t] = seq.offsets[t] >= 0 ? 1 : 0;
    return mask;
}

inline size_t loss_positions(const TokenSequence& seq) {
    size_t n = 0;
    for (int8_t l : seq.labels)
        if (l != kLabelPad)
            ++n;
    return n;
}

} // namespace detail

struct Prediction {
    int64_t offset = 0;
    double p1 = 0.0;
    bool positive = false;
};

// One verdict per real (non-pad-slot) position, in sequence order.
template <typename S>
std::vector<Prediction> predict_sequences(const std::vector<TokenSequence>& seqs,
                                          const ModelParameters<S>& params,
                                          const ModelConfig& cfg,
                                          double threshold,
                                          uint64_t data_vocab_hash) {
    if (data_vocab_hash != cfg.vocab_hash)
        throw VocabMismatchError("model and dataset token vocabularies differ");
    std::vector<Prediction> out;
    ForwardCache<S> cache;
    for (const auto& seq : seqs) {
        forward_sequence(seq.fields, detail::attn_mask(seq), params, cfg,
                         cache);
        for (size_t t = 0; t < seq.length(); ++t) {
            if (seq.offsets[t] < 0)
                continue;
            Prediction p;
            p.offset = seq.offsets[t];
            p.p1 = static_cast<double>(
                cache.probs(static_cast<Eigen::Index>(t), 1));
            p.positive = p.p1 > threshold;
            out.push_back(p);
        }
    }
    return out;
}

// Training-set F1 against the sequences' own labels (pad excluded).
template <typename S>
double f1_on_sequences(const std::vector<TokenSequence>& seqs,
                       const ModelParameters<S>& params,
                       const ModelConfig& cfg, double threshold = 0.5) {
    size_t tp = 0, fp = 0, fn = 0;
    ForwardCache<S> cache;
    for (const auto& seq : seqs) {
        forward_sequence(seq.fields, detail::attn_mask(seq), params, cfg,
                         cache);
        for (size_t t = 0; t < seq.length(); ++t) {
            int8_t lab = seq.labels[t];
            if (lab == kLabelPad)
                continue;
            bool pred = static_cast<double>(cache.probs(
                            static_cast<Eigen::Index>(t), 1)) > threshold;
            if (pred && lab == kLabelPos)
                ++tp;
            else if (pred)
                ++fp;
            else if (lab == kLabelPos)
                ++fn;
        }
    }
    if (tp == 0)
        return 0.0;
    double prec = static_cast<double>(tp) / static_cast<double>(tp + fp);
    double rec = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2.0 * prec * rec / (prec + rec);
}

template <typename S = float>
TrainResult<S> train(const std::vector<TokenSequence>& data,
                     const ModelConfig& cfg, const LossConfig& lc,
                     const TrainConfig& tc) {
    cfg.validate();
    if (data.empty())
        throw MissingInputError("training dataset is empty");
    for (const auto& seq : data) {
        if (seq.length() != static_cast<size_t>(cfg.L))
            throw Error("sequence length does not match the model");
        if (seq.fields.size() != cfg.field_dims.size())
            throw Error("sequence field count does not match the model");
    }

    TrainResult<S> result;
    result.params = ModelParameters<S>::init(cfg);
    ModelParameters<S> grads = ModelParameters<S>::shaped(cfg);
    grads.set_zero();
    AdamOptimizer<S> opt(cfg, tc);

    const size_t n = data.size();
    const int steps_per_epoch =
        static_cast<int>((n + static_cast<size_t>(tc.batch_size) - 1) /
                         static_cast<size_t>(tc.batch_size));
    const int total_steps = tc.max_steps > 0 ? tc.max_steps
                                             : steps_per_epoch * tc.epochs;
    const int warmup =
        std::max(1, static_cast<int>(std::llround(tc.warmup_frac *
                                                  total_steps)));

    std::mt19937_64 order_rng(tc.seed);
    std::mt19937_64 drop_rng(tc.seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    std::vector<size_t> counts(n);
    for (size_t i = 0; i < n; ++i)
        counts[i] = detail::loss_positions(data[i]);

    ForwardCache<S> cache;
    int step = 0;
    bool stop = false;
    while (step < total_steps && !stop) {
        std::shuffle(order.begin(), order.end(), order_rng);
        for (size_t base = 0; base < n && step < total_steps && !stop;
             base += static_cast<size_t>(tc.batch_size)) {
            size_t lim = std::min(n, base + static_cast<size_t>(tc.batch_size));
            size_t batch_count = 0;
            for (size_t i = base; i < lim; ++i)
                batch_count += counts[order[i]];

            double loss = 0.0;
            if (batch_count > 0) {
                grads.set_zero();
                Dropout<S> drop{tc.dropout, &drop_rng};
                for (size_t i = base; i < lim; ++i) {
                    const TokenSequence& seq = data[order[i]];
                    forward_sequence(seq.fields, detail::attn_mask(seq),
                                     result.params, cfg, cache,
                                     tc.dropout > 0.0 ? &drop : nullptr);
                    auto lg = focal_loss_grad(cache, seq.labels, lc);
                    loss += lg.loss_sum;
                    if (lg.count > 0) {
                        MatX<S> dl =
                            lg.dlogits / static_cast<S>(batch_count);
                        backward_sequence(seq.fields, result.params, cfg,
                                          cache, dl, grads);
                    }
                }
                loss /= static_cast<double>(batch_count);
            }
            if (!std::isfinite(loss))
                throw DivergedLossError("loss diverged at step " +
                                        std::to_string(step));
            result.loss_curve.push_back(loss);

            double lr_t = tc.lr * std::min(1.0, static_cast<double>(step + 1) /
                                                    warmup);
            if (batch_count > 0)
                opt.step(result.params, grads, lr_t);
            ++step;

            if (tc.target_f1 > 0.0 && step % tc.eval_every == 0) {
                result.train_f1 = f1_on_sequences(data, result.params, cfg,
                                                  tc.threshold);
                if (result.train_f1 >= tc.target_f1)
                    stop = true;
            }
        }
    }
    result.steps = step;
    return result;
}

} // namespace bindis::nn
