// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0

#include "bindis/nn/model.hpp"

#include <numeric>

namespace bindis::nn {

void ModelConfig::validate() const {
    if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || ffn_dim <= 0)
        throw Error("model dimensions must be positive");
    if (L < 2)
        throw Error("sequence length must be at least 2");
    if (d_model % n_heads != 0)
        throw Error("d_model must be divisible by n_heads");
    if (field_dims.empty())
        throw Error("field_dims must not be empty");
    int sum = std::accumulate(field_dims.begin(), field_dims.end(), 0);
    if (sum != d_model)
        throw Error("field_dims must sum to d_model");
    for (int d : field_dims)
        if (d <= 0)
            throw Error("field_dims entries must be positive");
    if (vocab_size <= 0)
        throw Error("vocab_size must be positive");
}

ModelConfig default_model_config(Task task, const TokenVocab& vocab, int L) {
    ModelConfig cfg;
    cfg.L = L;
    cfg.ffn_dim = 4 * cfg.d_model;
    cfg.field_dims = task == Task::T3 ? std::vector<int>{77, 77, 77, 77, 76}
                                      : std::vector<int>{128, 128, 128};
    cfg.vocab_size = vocab.size();
    cfg.vocab_hash = vocab.hash();
    cfg.validate();
    return cfg;
}

} // namespace bindis::nn
