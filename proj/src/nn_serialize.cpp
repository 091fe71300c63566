// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0

#include "bindis/nn/serialize.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace bindis::nn {

namespace {

constexpr char kMagic[4] = {'B', 'N', 'D', 'M'};
constexpr uint32_t kVersion = 1;

// Tensor payloads are raw IEEE-754 float32 in Eigen's column-major order;
// this container only targets little-endian hosts.
static_assert(sizeof(float) == 4);

} // namespace

void save_model(const std::string& path, ModelParameters<float>& params,
                const ModelConfig& cfg) {
    nlohmann::json header;
    header["schema_version"] = kVersion;
    header["dtype"] = "f32";
    header["config"] = {
        {"d_model", cfg.d_model},   {"n_layers", cfg.n_layers},
        {"n_heads", cfg.n_heads},   {"ffn_dim", cfg.ffn_dim},
        {"L", cfg.L},               {"field_dims", cfg.field_dims},
        {"vocab_size", cfg.vocab_size}, {"vocab_hash", cfg.vocab_hash},
        {"seed", cfg.seed},
    };
    auto manifest = nlohmann::json::array();
    for (auto& [name, t] : params.tensors())
        manifest.push_back({{"name", name},
                            {"rows", t->rows()},
                            {"cols", t->cols()}});
    header["tensors"] = manifest;
    std::string hstr = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot open " + path + " for writing");
    out.write(kMagic, 4);
    uint32_t ver = kVersion;
    out.write(reinterpret_cast<const char*>(&ver), 4);
    uint64_t hlen = hstr.size();
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(hstr.data(), static_cast<std::streamsize>(hstr.size()));
    for (auto& [name, t] : params.tensors())
        out.write(reinterpret_cast<const char*>(t->data()),
                  static_cast<std::streamsize>(sizeof(float) * t->size()));
    if (!out)
        throw Error("short write to " + path);
}

SavedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw MissingInputError("cannot open model file " + path);

    char magic[4];
    uint32_t ver = 0;
    uint64_t hlen = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&ver), 4);
    in.read(reinterpret_cast<char*>(&hlen), 8);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw SchemaMismatchError(path + " is not a model container");
    if (ver != kVersion)
        throw SchemaMismatchError("model container version " +
                                  std::to_string(ver) + " is unsupported");

    std::string hstr(hlen, '\0');
    in.read(hstr.data(), static_cast<std::streamsize>(hlen));
    if (!in)
        throw TruncatedFileError("model header truncated in " + path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hstr);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaMismatchError(std::string("bad model header: ") + e.what());
    }
    if (header.value("dtype", "") != "f32")
        throw SchemaMismatchError("unsupported tensor dtype");

    SavedModel model;
    try {
        const auto& c = header.at("config");
        model.cfg.d_model = c.at("d_model").get<int>();
        model.cfg.n_layers = c.at("n_layers").get<int>();
        model.cfg.n_heads = c.at("n_heads").get<int>();
        model.cfg.ffn_dim = c.at("ffn_dim").get<int>();
        model.cfg.L = c.at("L").get<int>();
        model.cfg.field_dims = c.at("field_dims").get<std::vector<int>>();
        model.cfg.vocab_size = c.at("vocab_size").get<int>();
        model.cfg.vocab_hash = c.at("vocab_hash").get<uint64_t>();
        model.cfg.seed = c.at("seed").get<uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaMismatchError(std::string("bad model config: ") + e.what());
    }
    model.cfg.validate();
    model.params = ModelParameters<float>::shaped(model.cfg);

    auto tensors = model.params.tensors();
    const auto& manifest = header.at("tensors");
    if (manifest.size() != tensors.size())
        throw SchemaMismatchError("tensor manifest does not match the config");
    for (size_t i = 0; i < tensors.size(); ++i) {
        const auto& entry = manifest[i];
        auto& [name, t] = tensors[i];
        if (entry.at("name").get<std::string>() != name ||
            entry.at("rows").get<Eigen::Index>() != t->rows() ||
            entry.at("cols").get<Eigen::Index>() != t->cols())
            throw SchemaMismatchError("tensor " + name +
                                      " has an unexpected shape");
        in.read(reinterpret_cast<char*>(t->data()),
                static_cast<std::streamsize>(sizeof(float) * t->size()));
        if (!in)
            throw TruncatedFileError("tensor data truncated in " + path);
    }
    return model;
}

} // namespace bindis::nn
