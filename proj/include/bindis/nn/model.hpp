// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Transformer encoder for per-instruction binary classification, written
// against Eigen dense types. Everything is templated on the scalar so the
// training path runs in float and the gradient checker in double. The
// backward pass is hand-derived and verified against central finite
// differences (grad_check).
#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/SpecialFunctions>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bindis/common.hpp"
#include "bindis/dataset.hpp"

namespace bindis::nn {

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using RowX = Eigen::Matrix<S, 1, Eigen::Dynamic>;

struct ModelConfig {
    int d_model = 384;
    int n_layers = 6;
    int n_heads = 8;
    int ffn_dim = 4 * 384;
    int L = 512;
    std::vector<int> field_dims; // concatenated widths, sum = d_model
    int vocab_size = 0;
    uint64_t vocab_hash = 0;
    uint64_t seed = 0;

    int head_dim() const { return d_model / n_heads; }
    void validate() const;
};

// Per-task defaults: the triple tasks split 384 as 128+128+128, the
// quintuple task as 77+77+77+77+76.
ModelConfig default_model_config(Task task, const TokenVocab& vocab,
                                 int L = 512);

struct LossConfig {
    double alpha = 0.75; // weight of the positive class
    double gamma = 2.0;  // focusing exponent
};

template <typename S>
struct LayerParams {
    MatX<S> wq, wk, wv, wo;             // d x d
    MatX<S> bq, bk, bv, bo;             // d x 1
    MatX<S> ln1_g, ln1_b, ln2_g, ln2_b; // d x 1
    MatX<S> w1, w2;                     // d x ffn, ffn x d
    MatX<S> b1, b2;                     // ffn x 1, d x 1
};

template <typename S>
struct ModelParameters {
    MatX<S> pos;                  // L x d
    std::vector<MatX<S>> fields;  // vocab x field_dim per field
    std::vector<LayerParams<S>> layers;
    MatX<S> lnf_g, lnf_b;         // d x 1
    MatX<S> head_w;               // d x 2
    MatX<S> head_b;               // 2 x 1

    // All tensors in a fixed order; optimizer, serialization and the
    // gradient checker iterate this.
    std::vector<std::pair<std::string, MatX<S>*>> tensors() {
        std::vector<std::pair<std::string, MatX<S>*>> out;
        out.emplace_back("pos", &pos);
        for (size_t f = 0; f < fields.size(); ++f)
            out.emplace_back("field" + std::to_string(f), &fields[f]);
        for (size_t l = 0; l < layers.size(); ++l) {
            auto& lp = layers[l];
            std::string p = "l" + std::to_string(l) + ".";
            out.emplace_back(p + "wq", &lp.wq);
            out.emplace_back(p + "bq", &lp.bq);
            out.emplace_back(p + "wk", &lp.wk);
            out.emplace_back(p + "bk", &lp.bk);
            out.emplace_back(p + "wv", &lp.wv);
            out.emplace_back(p + "bv", &lp.bv);
            out.emplace_back(p + "wo", &lp.wo);
            out.emplace_back(p + "bo", &lp.bo);
            out.emplace_back(p + "ln1_g", &lp.ln1_g);
            out.emplace_back(p + "ln1_b", &lp.ln1_b);
            out.emplace_back(p + "ln2_g", &lp.ln2_g);
            out.emplace_back(p + "ln2_b", &lp.ln2_b);
            out.emplace_back(p + "w1", &lp.w1);
            out.emplace_back(p + "b1", &lp.b1);
            out.emplace_back(p + "w2", &lp.w2);
            out.emplace_back(p + "b2", &lp.b2);
        }
        out.emplace_back("lnf_g", &lnf_g);
        out.emplace_back("lnf_b", &lnf_b);
        out.emplace_back("head_w", &head_w);
        out.emplace_back("head_b", &head_b);
        return out;
    }

    static ModelParameters shaped(const ModelConfig& cfg) {
        cfg.validate();
        ModelParameters p;
        p.pos = MatX<S>::Zero(cfg.L, cfg.d_model);
        for (int dim : cfg.field_dims)
            p.fields.push_back(MatX<S>::Zero(cfg.vocab_size, dim));
        p.layers.resize(static_cast<size_t>(cfg.n_layers));
        for (auto& lp : p.layers) {
            lp.wq = lp.wk = lp.wv = lp.wo = MatX<S>::Zero(cfg.d_model, cfg.d_model);
            lp.bq = lp.bk = lp.bv = lp.bo = MatX<S>::Zero(cfg.d_model, 1);
            lp.ln1_g = lp.ln2_g = MatX<S>::Ones(cfg.d_model, 1);
            lp.ln1_b = lp.ln2_b = MatX<S>::Zero(cfg.d_model, 1);
            lp.w1 = MatX<S>::Zero(cfg.d_model, cfg.ffn_dim);
            lp.b1 = MatX<S>::Zero(cfg.ffn_dim, 1);
            lp.w2 = MatX<S>::Zero(cfg.ffn_dim, cfg.d_model);
            lp.b2 = MatX<S>::Zero(cfg.d_model, 1);
        }
        p.lnf_g = MatX<S>::Ones(cfg.d_model, 1);
        p.lnf_b = MatX<S>::Zero(cfg.d_model, 1);
        p.head_w = MatX<S>::Zero(cfg.d_model, 2);
        p.head_b = MatX<S>::Zero(2, 1);
        return p;
    }

    static ModelParameters init(const ModelConfig& cfg) {
        ModelParameters p = shaped(cfg);
        std::mt19937_64 rng(cfg.seed);
        std::normal_distribution<double> dist(0.0, 0.02);
        auto fill = [&](MatX<S>& m) {
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                for (Eigen::Index i = 0; i < m.rows(); ++i)
                    m(i, j) = static_cast<S>(dist(rng));
        };
        fill(p.pos);
        for (auto& f : p.fields)
            fill(f);
        for (auto& lp : p.layers) {
            fill(lp.wq);
            fill(lp.wk);
            fill(lp.wv);
            fill(lp.wo);
            fill(lp.w1);
            fill(lp.w2);
        }
        fill(p.head_w);
        return p;
    }

    void set_zero() {
        for (auto& [name, t] : tensors())
            t->setZero();
    }
};

// Inverted dropout; masks carry 0 or 1/(1-p) so inference needs no
// rescaling. Draw order is fixed (column-major), keeping runs bit-equal.
template <typename S>
struct Dropout {
    double p = 0.0;
    std::mt19937_64* rng = nullptr;

    bool active() const { return p > 0.0 && rng != nullptr; }

    MatX<S> mask(Eigen::Index rows, Eigen::Index cols) {
        MatX<S> m(rows, cols);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const S keep = static_cast<S>(1.0 / (1.0 - p));
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i)
                m(i, j) = u(*rng) < p ? S(0) : keep;
        return m;
    }
};

namespace detail {

template <typename S>
void layer_norm(const MatX<S>& x, const MatX<S>& g, const MatX<S>& b,
                MatX<S>& y, MatX<S>& xhat, VecX<S>& rstd) {
    const S eps = static_cast<S>(1e-5);
    VecX<S> mu = x.rowwise().mean();
    MatX<S> xc = x.colwise() - mu;
    VecX<S> var = xc.array().square().rowwise().mean();
    rstd = (var.array() + eps).rsqrt();
    xhat = xc.array().colwise() * rstd.array();
    y = (xhat.array().rowwise() * g.col(0).transpose().array()).rowwise() +
        b.col(0).transpose().array();
}

// dx for y = g * xhat + b with biased row variance; accumulates dg, db.
template <typename S>
MatX<S> layer_norm_backward(const MatX<S>& dy, const MatX<S>& xhat,
                            const VecX<S>& rstd, const MatX<S>& g,
                            MatX<S>& dg, MatX<S>& db) {
    dg.col(0) += (dy.array() * xhat.array()).matrix().colwise().sum().transpose();
    db.col(0) += dy.colwise().sum().transpose();
    MatX<S> dxh = dy.array().rowwise() * g.col(0).transpose().array();
    VecX<S> m1 = dxh.rowwise().mean();
    VecX<S> m2 = (dxh.array() * xhat.array()).rowwise().mean();
    MatX<S> dx = ((dxh.array().colwise() - m1.array()) -
                  (xhat.array().colwise() * m2.array()))
                     .colwise() *
                 rstd.array();
    return dx;
}

template <typename S>
MatX<S> gelu(const MatX<S>& u) {
    const S inv_sqrt2 = static_cast<S>(0.7071067811865475244);
    return (S(0.5) * u.array() * (S(1) + (u.array() * inv_sqrt2).erf()))
        .matrix();
}

template <typename S>
MatX<S> gelu_grad(const MatX<S>& u) {
    const S inv_sqrt2 = static_cast<S>(0.7071067811865475244);
    const S inv_sqrt2pi = static_cast<S>(0.3989422804014326779);
    return (S(0.5) * (S(1) + (u.array() * inv_sqrt2).erf()) +
            u.array() * inv_sqrt2pi * (S(-0.5) * u.array().square()).exp())
        .matrix();
}

// Column-wise softmax; masked entries arrive as -1e30 and come out as an
// exact zero whenever the column has at least one live entry.
template <typename S>
MatX<S> softmax_cols(const MatX<S>& s) {
    RowX<S> mx = s.colwise().maxCoeff();
    MatX<S> p = (s.rowwise() - mx).array().exp();
    RowX<S> sum = p.colwise().sum();
    p.array().rowwise() /= sum.array();
    return p;
}

inline constexpr double kMaskedScore = -1e30;

} // namespace detail

template <typename S>
struct LayerCache {
    MatX<S> xin;          // residual stream entering the layer
    MatX<S> xhat1, a;     // ln1 intermediates, post-ln1 activations
    VecX<S> rstd1;
    MatX<S> q, k, v;      // projections
    std::vector<MatX<S>> p; // per-head attention, keys x queries
    MatX<S> o;            // concatenated head outputs
    MatX<S> m1;           // dropout mask on the attention sublayer
    MatX<S> x1;           // after attention residual
    MatX<S> xhat2, b;     // ln2 intermediates, post-ln2 activations
    VecX<S> rstd2;
    MatX<S> u, gact;      // ffn pre-activation and gelu output
    MatX<S> m2;           // dropout mask on the ffn sublayer
};

template <typename S>
struct ForwardCache {
    std::vector<char> mask; // true where the position holds a real token
    MatX<S> x0;
    std::vector<LayerCache<S>> layers;
    MatX<S> xf, xhatf, hn;
    VecX<S> rstdf;
    MatX<S> logits, logp, probs; // L x 2
};

// Position embedding plus the concatenation of per-field embeddings.
template <typename S>
MatX<S> embed_tokens(const std::vector<std::vector<int32_t>>& ids,
                     const ModelParameters<S>& params,
                     const ModelConfig& cfg) {
    if (ids.size() != cfg.field_dims.size())
        throw Error("field count mismatch in embed");
    MatX<S> x = params.pos;
    for (size_t f = 0; f < ids.size(); ++f) {
        if (ids[f].size() != static_cast<size_t>(cfg.L))
            throw Error("sequence length mismatch in embed");
    }
    int col = 0;
    for (size_t f = 0; f < ids.size(); ++f) {
        const int dim = cfg.field_dims[f];
        for (int t = 0; t < cfg.L; ++t) {
            int32_t id = ids[f][t];
            if (id < 0 || id >= cfg.vocab_size)
                throw IdOutOfRangeError("token id " + std::to_string(id) +
                                        " outside vocabulary of " +
                                        std::to_string(cfg.vocab_size));
            x.row(t).segment(col, dim) += params.fields[f].row(id);
        }
        col += dim;
    }
    return x;
}

// Full forward pass; fills the cache for a later backward call. `drop`
// may be null (inference / verification).
template <typename S>
void forward_sequence(const std::vector<std::vector<int32_t>>& ids,
                      const std::vector<char>& mask,
                      const ModelParameters<S>& params,
                      const ModelConfig& cfg, ForwardCache<S>& cache,
                      Dropout<S>* drop = nullptr) {
    const int L = cfg.L;
    const int d = cfg.d_model;
    const int nh = cfg.n_heads;
    const int dh = cfg.head_dim();
    const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));

    if (mask.size() != static_cast<size_t>(L))
        throw Error("mask length mismatch");

    cache.mask = mask;
    cache.x0 = embed_tokens(ids, params, cfg);
    cache.layers.assign(static_cast<size_t>(cfg.n_layers), LayerCache<S>{});

    MatX<S> x = cache.x0;
    for (int l = 0; l < cfg.n_layers; ++l) {
        LayerCache<S>& lc = cache.layers[static_cast<size_t>(l)];
        const LayerParams<S>& lp = params.layers[static_cast<size_t>(l)];
        lc.xin = x;

        detail::layer_norm(lc.xin, lp.ln1_g, lp.ln1_b, lc.a, lc.xhat1,
                           lc.rstd1);
        lc.q.noalias() = lc.a * lp.wq;
        lc.q.rowwise() += lp.bq.col(0).transpose();
        lc.k.noalias() = lc.a * lp.wk;
        lc.k.rowwise() += lp.bk.col(0).transpose();
        lc.v.noalias() = lc.a * lp.wv;
        lc.v.rowwise() += lp.bv.col(0).transpose();

        lc.o.resize(L, d);
        lc.p.assign(static_cast<size_t>(nh), MatX<S>());
        for (int h = 0; h < nh; ++h) {
            auto qh = lc.q.middleCols(h * dh, dh);
            auto kh = lc.k.middleCols(h * dh, dh);
            auto vh = lc.v.middleCols(h * dh, dh);
            MatX<S> s(L, L); // keys x queries
            s.noalias() = kh * qh.transpose();
            s *= scale;
            for (int j = 0; j < L; ++j)
                if (!mask[static_cast<size_t>(j)])
                    s.row(j).setConstant(static_cast<S>(detail::kMaskedScore));
            lc.p[static_cast<size_t>(h)] = detail::softmax_cols(s);
            lc.o.middleCols(h * dh, dh).noalias() =
                lc.p[static_cast<size_t>(h)].transpose() * vh;
        }

        MatX<S> attn = lc.o * lp.wo;
        attn.rowwise() += lp.bo.col(0).transpose();
        if (drop && drop->active()) {
            lc.m1 = drop->mask(L, d);
            attn.array() *= lc.m1.array();
        }
        lc.x1 = lc.xin + attn;

        detail::layer_norm(lc.x1, lp.ln2_g, lp.ln2_b, lc.b, lc.xhat2,
                           lc.rstd2);
        lc.u.noalias() = lc.b * lp.w1;
        lc.u.rowwise() += lp.b1.col(0).transpose();
        lc.gact = detail::gelu(lc.u);
        MatX<S> ffn = lc.gact * lp.w2;
        ffn.rowwise() += lp.b2.col(0).transpose();
        if (drop && drop->active()) {
            lc.m2 = drop->mask(L, d);
            ffn.array() *= lc.m2.array();
        }
        x = lc.x1 + ffn;
    }

    cache.xf = x;
    detail::layer_norm(cache.xf, params.lnf_g, params.lnf_b, cache.hn,
                       cache.xhatf, cache.rstdf);
    cache.logits.noalias() = cache.hn * params.head_w;
    cache.logits.rowwise() += params.head_b.col(0).transpose();

    // Stable log-softmax over the two classes.
    VecX<S> mx = cache.logits.rowwise().maxCoeff();
    MatX<S> z = cache.logits.colwise() - mx;
    VecX<S> lse = z.array().exp().rowwise().sum().log();
    cache.logp = z.colwise() - lse;
    cache.probs = cache.logp.array().exp();
}

// Linear head + softmax on an externally produced hidden state.
template <typename S>
MatX<S> classify(const MatX<S>& h, const ModelParameters<S>& params) {
    MatX<S> logits = h * params.head_w;
    logits.rowwise() += params.head_b.col(0).transpose();
    VecX<S> mx = logits.rowwise().maxCoeff();
    MatX<S> z = logits.colwise() - mx;
    VecX<S> lse = z.array().exp().rowwise().sum().log();
    return (z.colwise() - lse).array().exp();
}

// Mean over non-pad positions of -alpha_t (1-p_t)^gamma log(p_t).
template <typename S>
double focal_loss(const MatX<S>& probs, const std::vector<int8_t>& labels,
                  const LossConfig& lc) {
    double sum = 0.0;
    size_t count = 0;
    for (Eigen::Index t = 0; t < probs.rows(); ++t) {
        int8_t y = labels[static_cast<size_t>(t)];
        if (y == kLabelPad)
            continue;
        double pt = static_cast<double>(probs(t, y == kLabelPos ? 1 : 0));
        double at = y == kLabelPos ? lc.alpha : 1.0 - lc.alpha;
        sum += -at * std::pow(1.0 - pt, lc.gamma) * std::log(pt);
        ++count;
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

template <typename S>
struct LossGrad {
    double loss_sum = 0.0;   // undivided sum over non-pad positions
    size_t count = 0;        // non-pad positions
    MatX<S> dlogits;         // d(loss_sum)/d(logits)
};

// Loss and logit gradient from the cached stable log-probabilities.
template <typename S>
LossGrad<S> focal_loss_grad(const ForwardCache<S>& cache,
                            const std::vector<int8_t>& labels,
                            const LossConfig& lc) {
    LossGrad<S> out;
    const Eigen::Index L = cache.logp.rows();
    out.dlogits = MatX<S>::Zero(L, 2);
    for (Eigen::Index t = 0; t < L; ++t) {
        int8_t lab = labels[static_cast<size_t>(t)];
        if (lab == kLabelPad)
            continue;
        const int y = lab == kLabelPos ? 1 : 0;
        const double logpt = static_cast<double>(cache.logp(t, y));
        const double pt = std::exp(logpt);
        const double at = y == 1 ? lc.alpha : 1.0 - lc.alpha;
        const double onem = 1.0 - pt;
        out.loss_sum += -at * std::pow(onem, lc.gamma) * logpt;
        ++out.count;
        // d loss / d z_k = coef * (1{k=y} - p_k), coef = p_t * d loss/d p_t
        double coef = -at * std::pow(onem, lc.gamma);
        if (lc.gamma != 0.0)
            coef += at * lc.gamma * std::pow(onem, lc.gamma - 1.0) * pt * logpt;
        for (int k = 0; k < 2; ++k) {
            double pk = static_cast<double>(cache.probs(t, k));
            double ind = k == y ? 1.0 : 0.0;
            out.dlogits(t, k) = static_cast<S>(coef * (ind - pk));
        }
    }
    return out;
}

// Accumulates parameter gradients for one sequence. `dlogits` must already
// carry any batch scaling.
template <typename S>
void backward_sequence(const std::vector<std::vector<int32_t>>& ids,
                       const ModelParameters<S>& params,
                       const ModelConfig& cfg, const ForwardCache<S>& cache,
                       const MatX<S>& dlogits, ModelParameters<S>& grads) {
    const int L = cfg.L;
    const int nh = cfg.n_heads;
    const int dh = cfg.head_dim();
    const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));

    grads.head_w.noalias() += cache.hn.transpose() * dlogits;
    grads.head_b.col(0) += dlogits.colwise().sum().transpose();
    MatX<S> dhn = dlogits * params.head_w.transpose();
    MatX<S> dx = detail::layer_norm_backward(dhn, cache.xhatf, cache.rstdf,
                                             params.lnf_g, grads.lnf_g,
                                             grads.lnf_b);

    for (int l = cfg.n_layers - 1; l >= 0; --l) {
        const LayerCache<S>& lc = cache.layers[static_cast<size_t>(l)];
        const LayerParams<S>& lp = params.layers[static_cast<size_t>(l)];
        LayerParams<S>& lg = grads.layers[static_cast<size_t>(l)];

        // FFN sublayer.
        MatX<S> dffn = dx;
        if (lc.m2.size() > 0)
            dffn.array() *= lc.m2.array();
        lg.w2.noalias() += lc.gact.transpose() * dffn;
        lg.b2.col(0) += dffn.colwise().sum().transpose();
        MatX<S> dgact = dffn * lp.w2.transpose();
        MatX<S> du = dgact.array() * detail::gelu_grad(lc.u).array();
        lg.w1.noalias() += lc.b.transpose() * du;
        lg.b1.col(0) += du.colwise().sum().transpose();
        MatX<S> db = du * lp.w1.transpose();
        MatX<S> dx1 = dx + detail::layer_norm_backward(db, lc.xhat2, lc.rstd2,
                                                       lp.ln2_g, lg.ln2_g,
                                                       lg.ln2_b);

        // Attention sublayer.
        MatX<S> dattn = dx1;
        if (lc.m1.size() > 0)
            dattn.array() *= lc.m1.array();
        lg.wo.noalias() += lc.o.transpose() * dattn;
        lg.bo.col(0) += dattn.colwise().sum().transpose();
        MatX<S> do_ = dattn * lp.wo.transpose();

        MatX<S> dq = MatX<S>::Zero(L, cfg.d_model);
        MatX<S> dk = MatX<S>::Zero(L, cfg.d_model);
        MatX<S> dv = MatX<S>::Zero(L, cfg.d_model);
        for (int h = 0; h < nh; ++h) {
            const MatX<S>& p = lc.p[static_cast<size_t>(h)];
            auto qh = lc.q.middleCols(h * dh, dh);
            auto kh = lc.k.middleCols(h * dh, dh);
            auto vh = lc.v.middleCols(h * dh, dh);
            auto doh = do_.middleCols(h * dh, dh);

            dv.middleCols(h * dh, dh).noalias() = p * doh;
            MatX<S> dp(L, L);
            dp.noalias() = vh * doh.transpose();
            RowX<S> corr = (p.array() * dp.array()).colwise().sum();
            MatX<S> ds =
                (p.array() * (dp.array().rowwise() - corr.array())).matrix();
            ds *= scale;
            dk.middleCols(h * dh, dh).noalias() = ds * qh;
            dq.middleCols(h * dh, dh).noalias() = ds.transpose() * kh;
        }

        lg.wq.noalias() += lc.a.transpose() * dq;
        lg.bq.col(0) += dq.colwise().sum().transpose();
        lg.wk.noalias() += lc.a.transpose() * dk;
        lg.bk.col(0) += dk.colwise().sum().transpose();
        lg.wv.noalias() += lc.a.transpose() * dv;
        lg.bv.col(0) += dv.colwise().sum().transpose();

        MatX<S> da = dq * lp.wq.transpose();
        da.noalias() += dk * lp.wk.transpose();
        da.noalias() += dv * lp.wv.transpose();
        dx = dx1 + detail::layer_norm_backward(da, lc.xhat1, lc.rstd1,
                                               lp.ln1_g, lg.ln1_g, lg.ln1_b);
    }

    grads.pos += dx;
    int col = 0;
    for (size_t f = 0; f < ids.size(); ++f) {
        const int dim = cfg.field_dims[f];
        for (int t = 0; t < L; ++t)
            grads.fields[f].row(ids[f][t]) += dx.row(t).segment(col, dim);
        col += dim;
    }
}

// Analytic vs central finite differences on a randomly initialized model
// with random tokens; returns the max relative error over `samples`
// sampled parameters. Meant to run in double precision.
template <typename S = double>
double grad_check(const ModelConfig& cfg, const LossConfig& lc,
                  int samples = 200, double h = 1e-5, uint64_t seed = 1) {
    cfg.validate();
    std::mt19937_64 rng(seed);

    std::vector<std::vector<int32_t>> ids(
        cfg.field_dims.size(), std::vector<int32_t>(static_cast<size_t>(cfg.L)));
    for (auto& f : ids)
        for (auto& id : f)
            id = static_cast<int32_t>(rng() % static_cast<uint64_t>(cfg.vocab_size));
    std::vector<char> mask(static_cast<size_t>(cfg.L), 1);
    std::vector<int8_t> labels(static_cast<size_t>(cfg.L));
    for (size_t t = 0; t < labels.size(); ++t) {
        uint64_t r = rng() % 4;
        labels[t] = r == 3 ? kLabelPad : (r == 2 ? kLabelPos : kLabelNeg);
    }
    if (cfg.L >= 2) {
        mask.back() = 0; // exercise key masking
        labels.back() = kLabelPad;
    }

    ModelParameters<S> params = ModelParameters<S>::init(cfg);
    auto loss_of = [&](const ModelParameters<S>& p) {
        ForwardCache<S> cache;
        forward_sequence(ids, mask, p, cfg, cache);
        auto lg = focal_loss_grad(cache, labels, lc);
        return lg.count == 0 ? 0.0
                             : lg.loss_sum / static_cast<double>(lg.count);
    };

    ForwardCache<S> cache;
    forward_sequence(ids, mask, params, cfg, cache);
    auto lg = focal_loss_grad(cache, labels, lc);
    ModelParameters<S> grads = ModelParameters<S>::shaped(cfg);
    grads.set_zero();
    MatX<S> dlogits = lg.dlogits / static_cast<S>(lg.count);
    backward_sequence(ids, params, cfg, cache, dlogits, grads);

    auto ptensors = params.tensors();
    auto gtensors = grads.tensors();
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        size_t ti = rng() % ptensors.size();
        MatX<S>& pt = *ptensors[ti].second;
        Eigen::Index idx =
            static_cast<Eigen::Index>(rng() % static_cast<uint64_t>(pt.size()));
        S saved = pt.data()[idx];
        pt.data()[idx] = saved + static_cast<S>(h);
        double up = loss_of(params);
        pt.data()[idx] = saved - static_cast<S>(h);
        double dn = loss_of(params);
        pt.data()[idx] = saved;
        double numeric = (up - dn) / (2.0 * h);
        double analytic = static_cast<double>(gtensors[ti].second->data()[idx]);
        double rel = std::abs(analytic - numeric) /
                     std::max(std::abs(analytic) + std::abs(numeric), 1e-8);
        worst = std::max(worst, rel);
    }
    return worst;
}

} // namespace bindis::nn
