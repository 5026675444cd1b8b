#include <doctest.h>

#include "hyperaod/baselines.hpp"
#include "test_util.hpp"

using namespace hyperaod;
using testutil::fill_normal;

TEST_CASE("select_bands: identity, singleton, invariant violations") {
    Rng rng(1);
    RadiancePatch patch = testutil::make_patch(5, 4, 4, rng);

    std::vector<std::size_t> all{0, 1, 2, 3, 4};
    const RadiancePatch same = select_bands(patch, all);
    CHECK(same.values.data == patch.values.data);
    CHECK(same.wavelengths == patch.wavelengths);

    const RadiancePatch one = select_bands(patch, {0});
    CHECK(one.values.shape == std::vector<std::size_t>{1, 4, 4});
    CHECK(one.wavelengths == std::vector<double>{patch.wavelengths[0]});
    CHECK(one.valid.data == patch.valid.data);

    CHECK_THROWS_AS(select_bands(patch, {2, 1}), ConfigError);   // unsorted
    CHECK_THROWS_AS(select_bands(patch, {1, 1}), ConfigError);   // duplicate
    CHECK_THROWS_AS(select_bands(patch, {0, 7}), ConfigError);   // out of range
}

TEST_CASE("even_band_indices spans the spectrum") {
    const auto idx = even_band_indices(291, 8);
    CHECK(idx.size() == 8);
    CHECK(idx.front() == 0);
    CHECK(idx.back() == 290);
    for (std::size_t i = 1; i < idx.size(); ++i) CHECK(idx[i] > idx[i - 1]);
}

TEST_CASE("pixel dnn: identical spectra give identical predictions") {
    PixelDNNConfig cfg;
    cfg.input_bands = 6;
    cfg.hidden_sizes = {16, 8};
    PixelDnn model(cfg, 42);

    Rng rng(7);
    ArrayD x({6, 3, 3});
    fill_normal(x, rng);
    // copy pixel (0,0) spectrum to (2,2)
    for (std::size_t c = 0; c < 6; ++c) x.at(c, 2, 2) = x.at(c, 0, 0);
    const ArrayD y = model.forward(x);
    CHECK(y.at(2, 2) == doctest::Approx(y.at(0, 0)).epsilon(1e-15));
}

TEST_CASE("pixel dnn: spatial permutation equivariance") {
    PixelDNNConfig cfg;
    cfg.input_bands = 4;
    cfg.hidden_sizes = {12};
    PixelDnn model(cfg, 9);

    Rng rng(11);
    ArrayD x({4, 2, 4});
    fill_normal(x, rng);
    const ArrayD y = model.forward(x);

    // permute the 8 pixel positions
    std::vector<std::size_t> perm{5, 2, 7, 0, 3, 6, 1, 4};
    ArrayD xp({4, 2, 4});
    for (std::size_t c = 0; c < 4; ++c)
        for (std::size_t p = 0; p < 8; ++p) xp.data[c * 8 + p] = x.data[c * 8 + perm[p]];
    const ArrayD yp = model.forward(xp);
    for (std::size_t p = 0; p < 8; ++p)
        CHECK(yp.data[p] == doctest::Approx(y.data[perm[p]]).epsilon(1e-15));
}

TEST_CASE("pixel dnn: batched evaluation equals the per-pixel loop") {
    PixelDNNConfig cfg;
    cfg.input_bands = 5;
    cfg.hidden_sizes = {16, 8};
    PixelDnn model(cfg, 13);

    Rng rng(17);
    ArrayD x({5, 8, 8});
    fill_normal(x, rng);
    const ArrayD batched = model.forward(x);

    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) {
            ArrayD pixel({5, 1, 1});
            for (std::size_t c = 0; c < 5; ++c) pixel[c] = x.at(c, i, j);
            const ArrayD y = model.forward(pixel);
            CHECK(std::abs(batched.at(i, j) - y[0]) < 1e-6);
        }
}

TEST_CASE("pixel dnn config validation") {
    PixelDNNConfig cfg;
    cfg.input_bands = 3;
    cfg.band_indices = std::vector<std::size_t>{0, 2, 1};
    CHECK_THROWS_AS(cfg.validate(5), ConfigError);  // not increasing
    cfg.band_indices = std::vector<std::size_t>{0, 2, 9};
    CHECK_THROWS_AS(cfg.validate(5), ConfigError);  // out of range
    cfg.band_indices = std::vector<std::size_t>{0, 2, 4};
    CHECK_NOTHROW(cfg.validate(5));
    cfg.band_indices = std::vector<std::size_t>{0, 2};
    CHECK_THROWS_AS(cfg.validate(5), ConfigError);  // wrong length
}
