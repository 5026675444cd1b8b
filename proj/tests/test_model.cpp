#include <doctest.h>

#include "hyperaod/model.hpp"
#include "test_util.hpp"

using namespace hyperaod;
using testutil::fill_normal;

namespace {

ViTCGConfig tiny_config() {
    // hand-ledger configuration: every weight shape summed below
    ViTCGConfig cfg;
    cfg.channels = 4;
    cfg.groups = 2;
    cfg.spatial = 16;
    cfg.patch = 8;
    cfg.token_dim = 16;
    cfg.depth = 1;
    cfg.heads = 2;
    cfg.mlp_ratio = 4.0;
    cfg.decoder_channels = {8, 4, 4, 4};
    return cfg;
}

}  // namespace

TEST_CASE("group_channels: contiguous split, bit-exact round trip") {
    Rng rng(5);
    ArrayF x({6, 4, 4});
    fill_normal(x, rng);

    const ArrayF grouped = group_channels(x, 2);
    CHECK(grouped.shape == std::vector<std::size_t>{2, 3, 4, 4});
    // group 0 = channels [c0, c1, c2], values untouched
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t p = 0; p < 16; ++p) {
            CHECK(grouped.data[(0 * 3 + c) * 16 + p] == x.data[c * 16 + p]);
            CHECK(grouped.data[(1 * 3 + c) * 16 + p] == x.data[(3 + c) * 16 + p]);
        }

    const ArrayF restored = ungroup_channels(grouped);
    CHECK(restored.shape == x.shape);
    CHECK(restored.data == x.data);  // bit-exact

    // every divisor round-trips
    for (std::size_t g : {1u, 2u, 3u, 6u}) {
        const ArrayF rt = ungroup_channels(group_channels(x, g));
        CHECK(rt.data == x.data);
    }
}

TEST_CASE("group_channels: shape arithmetic and divisibility errors") {
    ArrayF x({291, 2, 2});
    const ArrayF g3 = group_channels(x, 3);
    CHECK(g3.shape == std::vector<std::size_t>{3, 97, 2, 2});
    CHECK_THROWS_AS(group_channels(x, 2), ConfigError);  // 291 is odd

    // G=1 is the identity reshape
    const ArrayF g1 = group_channels(x, 1);
    CHECK(g1.shape == std::vector<std::size_t>{1, 291, 2, 2});
    CHECK(g1.data == x.data);
}

TEST_CASE("config validation catches every inconsistency") {
    ViTCGConfig cfg = tiny_config();
    CHECK_NOTHROW(cfg.validate());

    ViTCGConfig bad = cfg;
    bad.groups = 3;  // 4 % 3 != 0
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    bad = cfg;
    bad.patch = 5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    bad = cfg;
    bad.heads = 3;  // 16 % 3 != 0
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    bad = cfg;
    bad.decoder_channels = {8, 4};  // needs log2(8)+1 = 4 entries
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    bad = cfg;
    bad.norm_style = "pre";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("embed_patches: token counts, ordering, zero input") {
    ViTCGConfig cfg = tiny_config();
    ViTCG model(cfg, 99);

    ArrayD grouped({2, 2, 16, 16});
    Rng rng(17);
    fill_normal(grouped, rng);
    const TokenSequence seq = model.embed_patches(grouped);
    CHECK(seq.count() == cfg.groups * cfg.grid() * cfg.grid());  // 2 * 2 * 2 = 8
    CHECK(seq.tokens.dim(1) == 16);
    // groups form contiguous blocks ordered row-major
    CHECK(seq.group_index == std::vector<std::size_t>{0, 0, 0, 0, 1, 1, 1, 1});
    CHECK(seq.grid_position[0] == std::array<std::size_t, 2>{0, 0});
    CHECK(seq.grid_position[1] == std::array<std::size_t, 2>{0, 1});
    CHECK(seq.grid_position[2] == std::array<std::size_t, 2>{1, 0});

    // zero input with the zero-initialized projection bias gives zero tokens
    ArrayD zeros({2, 2, 16, 16});
    const TokenSequence zseq = model.embed_patches(zeros);
    for (double v : zseq.tokens.data) CHECK(v == 0.0);

    // default paper-scale arithmetic: 3 groups x 12 x 12 grid
    ViTCGConfig paper;
    CHECK(paper.n_tokens() == 432);

    // degenerate single-patch case
    ViTCGConfig one = tiny_config();
    one.patch = 16;
    one.decoder_channels = {8, 4, 4, 4, 4};
    one.groups = 1;
    CHECK(one.n_tokens() == 1);
    CHECK_NOTHROW(ViTCG(one, 1));
}

TEST_CASE("add_positional: additive tables, per-group offsets, table sizes") {
    ViTCGConfig cfg = tiny_config();
    ViTCG model(cfg, 99);
    auto& reg = model.params();

    auto* spe = reg.find("pos.spatial");
    auto* gpe = reg.find("pos.group");
    REQUIRE(spe != nullptr);
    REQUIRE(gpe != nullptr);
    CHECK(spe->value.shape == std::vector<std::size_t>{4, 16});  // (H/p)*(W/p) entries
    CHECK(gpe->value.shape == std::vector<std::size_t>{2, 16});  // G entries

    ArrayD grouped({2, 2, 16, 16});
    Rng rng(21);
    fill_normal(grouped, rng);
    TokenSequence seq = model.embed_patches(grouped);
    const ArrayD before = seq.tokens;

    // all-zero tables act as the identity
    spe->value.fill(0.0);
    gpe->value.fill(0.0);
    TokenSequence same = model.add_positional(seq);
    CHECK(same.tokens.data == before.data);

    // tokens sharing a grid cell in different groups differ by exactly the
    // group embedding difference
    fill_normal(spe->value, rng);
    fill_normal(gpe->value, rng);
    TokenSequence shifted = model.add_positional(std::move(seq));
    const std::size_t q = cfg.tokens_per_group();
    for (std::size_t j = 0; j < 16; ++j) {
        const double lhs = (shifted.tokens.at(0, j) - before.at(0, j)) -
                           (shifted.tokens.at(q, j) - before.at(q, j));
        const double rhs = gpe->value.at(0, j) - gpe->value.at(1, j);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("encode: permutation equivariance once positions are baked in") {
    ViTCGConfig cfg = tiny_config();
    ViTCG model(cfg, 7);

    Rng rng(23);
    ArrayD x({cfg.channels, cfg.spatial, cfg.spatial});
    fill_normal(x, rng);
    TokenSequence seq = model.add_positional(model.embed_patches(group_channels(x, cfg.groups)));

    const TokenSequence plain = model.encode(seq);

    // random permutation of tokens together with their metadata
    std::vector<std::size_t> perm(seq.count());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng prng(31);
    prng.shuffle(perm);
    TokenSequence shuffled;
    shuffled.tokens = ArrayD(seq.tokens.shape);
    shuffled.group_index.resize(seq.count());
    shuffled.grid_position.resize(seq.count());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        for (std::size_t j = 0; j < cfg.token_dim; ++j)
            shuffled.tokens.at(i, j) = seq.tokens.at(perm[i], j);
        shuffled.group_index[i] = seq.group_index[perm[i]];
        shuffled.grid_position[i] = seq.grid_position[perm[i]];
    }
    const TokenSequence enc_shuffled = model.encode(shuffled);
    for (std::size_t i = 0; i < perm.size(); ++i)
        for (std::size_t j = 0; j < cfg.token_dim; ++j)
            CHECK(enc_shuffled.tokens.at(i, j) ==
                  doctest::Approx(plain.tokens.at(perm[i], j)).epsilon(1e-9));
}

TEST_CASE("decode: upsampling chain shape arithmetic") {
    // p=2, grid 8 -> one x2 stage -> 16 x 16
    ViTCGConfig cfg;
    cfg.channels = 2;
    cfg.groups = 1;
    cfg.spatial = 16;
    cfg.patch = 2;
    cfg.token_dim = 8;
    cfg.depth = 1;
    cfg.heads = 2;
    cfg.decoder_channels = {16, 8};
    ViTCG model(cfg, 3);

    Rng rng(5);
    ArrayD x({2, 16, 16});
    fill_normal(x, rng);
    const ArrayD y = model.forward(x);
    CHECK(y.shape == std::vector<std::size_t>{16, 16});
}

TEST_CASE("decode: opposite group tokens fuse to the zero vector") {
    ViTCGConfig cfg = tiny_config();
    ViTCG model(cfg, 11);

    Rng rng(13);
    TokenSequence seq;
    const std::size_t q = cfg.tokens_per_group();
    seq.tokens = ArrayD({cfg.n_tokens(), cfg.token_dim});
    seq.group_index.resize(cfg.n_tokens());
    seq.grid_position.resize(cfg.n_tokens());
    for (std::size_t t = 0; t < cfg.n_tokens(); ++t) {
        seq.group_index[t] = t / q;
        seq.grid_position[t] = {(t % q) / cfg.grid(), (t % q) % cfg.grid()};
    }
    for (std::size_t qi = 0; qi < q; ++qi)
        for (std::size_t j = 0; j < cfg.token_dim; ++j) {
            const double v = rng.normal();
            seq.tokens.at(qi, j) = v;       // group 0: t
            seq.tokens.at(q + qi, j) = -v;  // group 1: -t
        }

    TokenSequence zero_seq = seq;
    zero_seq.tokens.fill(0.0);
    const ArrayD a = model.decode(seq);
    const ArrayD b = model.decode(zero_seq);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("forward: shape contract across group counts, finiteness, determinism") {
    for (std::size_t g : {std::size_t(1), std::size_t(3), std::size_t(97)}) {
        ViTCGConfig cfg;
        cfg.channels = 291;
        cfg.groups = g;
        cfg.spatial = 32;
        cfg.patch = 8;
        cfg.token_dim = 32;
        cfg.depth = 1;
        cfg.heads = 4;
        cfg.decoder_channels = {16, 8, 8, 4};
        ViTCG model(cfg, 19);

        Rng rng(100 + g);
        ArrayD x({291, 32, 32});
        fill_normal(x, rng);
        const ArrayD y = model.forward(x);
        CHECK(y.shape == std::vector<std::size_t>{32, 32});
        for (double v : y.data) CHECK(std::isfinite(v));

        const ArrayD y2 = model.forward(x);
        CHECK(y.data == y2.data);  // evaluation mode is a pure function
    }
}

TEST_CASE("predict: mask copied through") {
    ViTCGConfig cfg = tiny_config();
    ViTCG model(cfg, 2);
    Rng rng(3);
    RadiancePatch patch = testutil::make_patch(4, 16, 16, rng);
    patch.valid.at(3, 5) = 0;
    const AODField out = model.predict(patch);
    CHECK(out.values.shape == std::vector<std::size_t>{16, 16});
    CHECK(out.valid.at(3, 5) == 0);
    CHECK(out.valid.at(0, 0) == 1);
}

TEST_CASE("count_parameters: hand-summed ledger for the tiny config") {
    // embed 128*16+16 = 2064; spatial pe 4*16 = 64; group pe 2*16 = 32;
    // block: qkv 3*(256+16) = 816, wo 272, ln1 32, mlp 16*64+64 + 64*16+16
    // = 2128, ln2 32 -> 3280; proj1 136; proj2 72; stages 292+8, 148+8,
    // 148+8; head 5. Total 6265.
    const ViTCGConfig cfg = tiny_config();
    CHECK(count_parameters(cfg) == 6265);

    ViTCG model(cfg, 1);
    CHECK(model.parameter_count() == 6265);
}

TEST_CASE("count_parameters: formula matches construction and is monotone in depth") {
    ViTCGConfig cfg = tiny_config();
    cfg.channels = 12;
    cfg.groups = 3;
    ViTCG model(cfg, 1);
    CHECK(count_parameters(cfg) == model.parameter_count());

    ViTCGConfig deeper = cfg;
    deeper.depth *= 2;
    CHECK(count_parameters(deeper) > count_parameters(cfg));
}

TEST_CASE("count_parameters: default configuration sits in the documented band") {
    const ViTCGConfig cfg;  // defaults
    const std::size_t n = count_parameters(cfg);
    CHECK(n >= 6000000);
    CHECK(n <= 12000000);
}
