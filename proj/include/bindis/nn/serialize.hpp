// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Versioned model container: magic + version, a JSON header carrying the
// configuration, vocabulary hash and tensor manifest, then the raw
// little-endian float32 tensor data in manifest order.
#pragma once

#include <string>

#include "bindis/nn/model.hpp"

namespace bindis::nn {

struct SavedModel {
    ModelConfig cfg;
    ModelParameters<float> params;
};

void save_model(const std::string& path, ModelParameters<float>& params,
                const ModelConfig& cfg);

SavedModel load_model(const std::string& path);

} // namespace bindis::nn
