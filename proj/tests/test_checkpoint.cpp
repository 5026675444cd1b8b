#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hyperaod/baselines.hpp"
#include "hyperaod/checkpoint.hpp"
#include "hyperaod/model.hpp"
#include "test_util.hpp"

using namespace hyperaod;

namespace {

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

BandStats demo_stats(std::size_t c) {
    BandStats s;
    for (std::size_t i = 0; i < c; ++i) {
        s.mean.push_back(0.1 * static_cast<double>(i) + 0.05);
        s.stddev.push_back(1.0 + 0.01 * static_cast<double>(i));
    }
    return s;
}

ViTCGConfig small_cfg() {
    ViTCGConfig cfg;
    cfg.channels = 6;
    cfg.groups = 2;
    cfg.spatial = 16;
    cfg.patch = 4;
    cfg.token_dim = 8;
    cfg.depth = 1;
    cfg.heads = 2;
    cfg.decoder_channels = {8, 4, 4};
    return cfg;
}

}  // namespace

TEST_CASE("checkpoint: bit-exact round trip of a ViTCG model") {
    const std::string path = temp_path("hyperaod_ckpt_vitcg.bin");
    ViTCG model(small_cfg(), 77);
    save_checkpoint(path, model, demo_stats(6));

    const Checkpoint ck = read_checkpoint(path);
    CHECK(ck.format_version == "vitcg-ckpt-1");
    CHECK(ck.model_kind == "vitcg");
    CHECK(ck.stats.mean == demo_stats(6).mean);
    CHECK(ck.stats.stddev == demo_stats(6).stddev);

    const auto rebuilt = build_model(ck);
    REQUIRE(rebuilt->params().items().size() == model.params().items().size());
    for (std::size_t i = 0; i < model.params().items().size(); ++i) {
        const auto* a = model.params().items()[i];
        const auto* b = rebuilt->params().items()[i];
        CHECK(a->name == b->name);
        CHECK(a->value.shape == b->value.shape);
        CHECK(a->value.data == b->value.data);  // f64 bits preserved
    }
    std::remove(path.c_str());
}

TEST_CASE("checkpoint: pixel DNN kind discriminator") {
    const std::string path = temp_path("hyperaod_ckpt_dnn.bin");
    PixelDNNConfig cfg;
    cfg.input_bands = 8;
    cfg.hidden_sizes = {16, 8};
    cfg.band_indices = std::vector<std::size_t>{0, 2, 4, 6, 8, 10, 12, 14};
    PixelDnn model(cfg, 3);
    save_checkpoint(path, model, demo_stats(8));

    const Checkpoint ck = read_checkpoint(path);
    CHECK(ck.model_kind == "pixel_dnn");
    const auto rebuilt = build_model(ck);
    CHECK(rebuilt->kind() == "pixel_dnn");
    CHECK(rebuilt->input_channels() == 8);
    const auto* dnn = dynamic_cast<const PixelDnn*>(rebuilt.get());
    REQUIRE(dnn != nullptr);
    REQUIRE(dnn->config().band_indices.has_value());
    CHECK(*dnn->config().band_indices == *cfg.band_indices);
    std::remove(path.c_str());
}

TEST_CASE("checkpoint: corruption is reported distinctly") {
    const std::string path = temp_path("hyperaod_ckpt_corrupt.bin");
    ViTCG model(small_cfg(), 5);
    save_checkpoint(path, model, demo_stats(6));

    auto slurp = [&] {
        std::ifstream is(path, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(is), {});
    };
    auto spit = [&](const std::string& bytes) {
        std::ofstream os(path, std::ios::binary);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    };
    const std::string good = slurp();

    // bad magic
    std::string bad = good;
    bad[0] = 'X';
    spit(bad);
    CHECK_THROWS_WITH_AS(read_checkpoint(path), doctest::Contains("magic"), DataError);

    // wrong format version inside the header
    bad = good;
    const auto pos = bad.find("vitcg-ckpt-1");
    REQUIRE(pos != std::string::npos);
    bad.replace(pos, 12, "vitcg-ckpt-9");
    spit(bad);
    CHECK_THROWS_WITH_AS(read_checkpoint(path), doctest::Contains("format"), DataError);

    // truncated payload
    bad = good.substr(0, good.size() - 64);
    spit(bad);
    CHECK_THROWS_WITH_AS(read_checkpoint(path), doctest::Contains("truncated"), DataError);

    std::remove(path.c_str());
}
