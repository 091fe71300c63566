// Copyright (c) bindis contributors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "bindis/nn/serialize.hpp"

using namespace bindis;

namespace {

nn::ModelConfig small_cfg() {
    nn::ModelConfig cfg;
    cfg.d_model = 12;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.ffn_dim = 24;
    cfg.L = 8;
    cfg.field_dims = {4, 4, 4};
    cfg.vocab_size = 30;
    cfg.vocab_hash = 0x1122334455667788ull;
    cfg.seed = 42;
    return cfg;
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name)
        : path((std::filesystem::temp_directory_path() / name).string()) {}
    ~TempFile() { std::remove(path.c_str()); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

} // namespace

TEST_SUITE_BEGIN("serialize");

TEST_CASE("model container round trips bit-exactly") {
    auto cfg = small_cfg();
    auto params = nn::ModelParameters<float>::init(cfg);
    TempFile f("bindis_model_rt.bin");
    nn::save_model(f.path, params, cfg);

    auto loaded = nn::load_model(f.path);
    CHECK(loaded.cfg.d_model == cfg.d_model);
    CHECK(loaded.cfg.n_layers == cfg.n_layers);
    CHECK(loaded.cfg.field_dims == cfg.field_dims);
    CHECK(loaded.cfg.vocab_hash == cfg.vocab_hash);
    CHECK(loaded.cfg.seed == cfg.seed);

    auto got = loaded.params.tensors();
    auto want = params.tensors();
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].first == want[i].first);
        CHECK(*got[i].second == *want[i].second);
    }
}

TEST_CASE("saving the same parameters twice yields identical bytes") {
    auto cfg = small_cfg();
    auto params = nn::ModelParameters<float>::init(cfg);
    TempFile a("bindis_model_a.bin"), b("bindis_model_b.bin");
    nn::save_model(a.path, params, cfg);
    nn::save_model(b.path, params, cfg);
    CHECK(slurp(a.path) == slurp(b.path));
}

TEST_CASE("container rejects foreign and damaged files") {
    auto cfg = small_cfg();
    auto params = nn::ModelParameters<float>::init(cfg);
    TempFile f("bindis_model_dmg.bin");
    nn::save_model(f.path, params, cfg);

    CHECK_THROWS_AS(nn::load_model(f.path + ".missing"), MissingInputError);

    auto bytes = slurp(f.path);
    {
        auto bad = bytes;
        bad[0] = 'X';
        std::ofstream(f.path, std::ios::binary).write(bad.data(),
                                                      static_cast<std::streamsize>(bad.size()));
        CHECK_THROWS_AS(nn::load_model(f.path), SchemaMismatchError);
    }
    {
        auto bad = bytes;
        bad[4] = 99; // version
        std::ofstream(f.path, std::ios::binary).write(bad.data(),
                                                      static_cast<std::streamsize>(bad.size()));
        CHECK_THROWS_AS(nn::load_model(f.path), SchemaMismatchError);
    }
    {
        auto bad = bytes.substr(0, bytes.size() - 64);
        std::ofstream(f.path, std::ios::binary).write(bad.data(),
                                                      static_cast<std::streamsize>(bad.size()));
        CHECK_THROWS_AS(nn::load_model(f.path), TruncatedFileError);
    }
}

TEST_SUITE_END();
