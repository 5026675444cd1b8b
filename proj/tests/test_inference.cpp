#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "hyperaod/datapipe.hpp"
#include "hyperaod/inference.hpp"
#include "test_util.hpp"

using namespace hyperaod;

namespace {

GranuleScene flat_scene(std::size_t hs, std::size_t ws, std::size_t c = 2) {
    GranuleScene s;
    s.granule_id = "S";
    s.radiance = ArrayF({c, hs, ws}, 0.5f);
    s.aod = ArrayF({hs, ws}, 0.3f);
    s.valid = MaskGrid({hs, ws}, 1);
    s.lat = ArrayF({hs, ws}, 0.0f);
    s.lon = ArrayF({hs, ws}, 0.0f);
    s.wavelengths.resize(c);
    for (std::size_t i = 0; i < c; ++i) s.wavelengths[i] = 400.0 + static_cast<double>(i);
    return s;
}

}  // namespace

TEST_CASE("slide_windows: exact tiling, snap rule, degenerate scene") {
    const WindowPlan exact = slide_windows(192, 192, 96, 96);
    CHECK(exact.origins.size() == 4);

    // 100 x 100: origins {0, 4} per axis
    const WindowPlan snapped = slide_windows(100, 100, 96, 96);
    REQUIRE(snapped.origins.size() == 4);
    std::set<std::size_t> rows, cols;
    for (const auto& [r, c] : snapped.origins) {
        rows.insert(r);
        cols.insert(c);
    }
    CHECK(rows == std::set<std::size_t>{0, 4});
    CHECK(cols == std::set<std::size_t>{0, 4});

    const WindowPlan single = slide_windows(96, 96, 96, 96);
    REQUIRE(single.origins.size() == 1);
    CHECK(single.origins[0] == std::pair<std::size_t, std::size_t>{0, 0});

    CHECK_THROWS_AS(slide_windows(95, 96, 96, 96), DataError);
    CHECK_THROWS_AS(slide_windows(192, 192, 96, 0), ConfigError);
    CHECK_THROWS_AS(slide_windows(192, 192, 96, 97), ConfigError);
}

TEST_CASE("slide_windows: full coverage for awkward sizes") {
    for (std::size_t hs : {96u, 97u, 100u, 191u, 192u, 200u}) {
        for (std::size_t stride : {32u, 48u, 96u}) {
            const WindowPlan plan = slide_windows(hs, hs, 96, stride);
            Array<std::uint8_t> covered({hs, hs});
            for (const auto& [r, c] : plan.origins) {
                CHECK(r + 96 <= hs);
                CHECK(c + 96 <= hs);
                for (std::size_t i = 0; i < 96; ++i)
                    for (std::size_t j = 0; j < 96; ++j) covered.at(r + i, c + j) = 1;
            }
            for (auto v : covered.data) CHECK(v == 1);
        }
    }
}

TEST_CASE("retrieve_scene: constant predictor gives a constant map at any stride") {
    const GranuleScene scene = flat_scene(192, 192);
    const WindowPredictor constant = [](const ArrayF&, const MaskGrid&) {
        return ArrayD({96, 96}, 0.3);
    };
    for (std::size_t stride : {96u, 48u, 32u}) {
        const SceneRetrieval r =
            retrieve_scene(constant, scene, slide_windows(192, 192, 96, stride));
        for (double v : r.aod.data) CHECK(v == doctest::Approx(0.3).epsilon(1e-15));
        for (auto c : r.coverage.data) CHECK(c >= 1);
    }
}

TEST_CASE("retrieve_scene: origin-coded stub matches direct assembly at stride 96") {
    const GranuleScene scene = flat_scene(192, 192);
    // the predictor leaks its window's top-left row through the prediction
    std::size_t call_row = 0;
    std::vector<std::pair<std::size_t, std::size_t>> seen;
    const WindowPlan plan = slide_windows(192, 192, 96, 96);

    std::size_t idx = 0;
    const WindowPredictor coded = [&](const ArrayF&, const MaskGrid&) {
        const auto [r, c] = plan.origins[idx++];
        (void)c;
        call_row = r;
        return ArrayD({96, 96}, static_cast<double>(call_row));
    };
    const SceneRetrieval r = retrieve_scene(coded, scene, plan);

    // disjoint tiling: every pixel equals its block's origin row, coverage 1
    for (std::size_t i = 0; i < 192; ++i)
        for (std::size_t j = 0; j < 192; ++j) {
            const double expect = static_cast<double>((i / 96) * 96);
            CHECK(r.aod.at(i, j) == expect);  // bit-for-bit
            CHECK(r.coverage.at(i, j) == 1);
        }
}

TEST_CASE("retrieve_scene: overlap counts match a brute-force enumeration at stride 48") {
    const GranuleScene scene = flat_scene(192, 192);
    const WindowPlan plan = slide_windows(192, 192, 96, 48);
    const WindowPredictor constant = [](const ArrayF&, const MaskGrid&) {
        return ArrayD({96, 96}, 1.0);
    };
    const SceneRetrieval r = retrieve_scene(constant, scene, plan);

    Array<std::uint32_t> oracle({192, 192});
    for (const auto& [oy, ox] : plan.origins)
        for (std::size_t i = 0; i < 96; ++i)
            for (std::size_t j = 0; j < 96; ++j) ++oracle.at(oy + i, ox + j);
    CHECK(oracle.data == r.coverage.data);
    CHECK(r.coverage.at(0, 0) == 1);      // corner
    CHECK(r.coverage.at(96, 96) == 4);    // interior
    std::uint32_t cmin = r.coverage[0];
    for (auto c : r.coverage.data) cmin = std::min(cmin, c);
    CHECK(cmin >= 1);
}

TEST_CASE("retrieve_scene: window evaluation order does not change the map") {
    const GranuleScene scene = flat_scene(144, 144);
    WindowPlan plan = slide_windows(144, 144, 96, 48);

    const WindowPredictor stub = [](const ArrayF& values, const MaskGrid&) {
        ArrayD out({96, 96});
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = 0.1 + 0.001 * static_cast<double>(i % 97) +
                     static_cast<double>(values.at(0, 0, 0));
        return out;
    };
    const SceneRetrieval a = retrieve_scene(stub, scene, plan);

    std::reverse(plan.origins.begin(), plan.origins.end());
    const SceneRetrieval b = retrieve_scene(stub, scene, plan);
    for (std::size_t p = 0; p < a.aod.size(); ++p)
        CHECK(std::abs(a.aod[p] - b.aod[p]) < 1e-12);
    CHECK(a.coverage.data == b.coverage.data);
}

TEST_CASE("retrieve_scene: validity mask propagated") {
    GranuleScene scene = flat_scene(96, 96);
    scene.valid.at(5, 6) = 0;
    const WindowPredictor constant = [](const ArrayF&, const MaskGrid&) {
        return ArrayD({96, 96}, 0.2);
    };
    const SceneRetrieval r = retrieve_scene(constant, scene, slide_windows(96, 96, 96, 96));
    CHECK(r.valid.at(5, 6) == 0);
    CHECK(r.valid.at(0, 0) == 1);
}

TEST_CASE("make_model_predictor: refuses a checkpoint without statistics") {
    // the predictor factory needs band statistics; an empty set must throw
    BandStats empty;
    struct Dummy final : Regressor {
        std::unique_ptr<Trace> make_trace() const override { return nullptr; }
        ArrayD forward(const ArrayD&, Trace*) const override { return ArrayD({1, 1}); }
        void backward(Trace&, const ArrayD&) override {}
        nn::ParamRegistry& params() override { return reg_; }
        const nn::ParamRegistry& params() const override { return reg_; }
        std::string kind() const override { return "dummy"; }
        nlohmann::json config_json() const override { return {}; }
        std::size_t input_channels() const override { return 1; }
        nn::ParamRegistry reg_;
    } dummy;
    CHECK_THROWS_AS(make_model_predictor(dummy, empty), DataError);
}
