#include "hyperaod/inference.hpp"

#include <cmath>

#include "hyperaod/baselines.hpp"
#include "hyperaod/datapipe.hpp"

namespace hyperaod {

namespace {

std::vector<std::size_t> axis_origins(std::size_t extent, std::size_t window,
                                      std::size_t stride) {
    std::vector<std::size_t> out;
    for (std::size_t o = 0; o + window <= extent; o += stride) out.push_back(o);
    if (out.empty() || out.back() + window < extent) out.push_back(extent - window);
    return out;
}

}  // namespace

WindowPlan slide_windows(std::size_t scene_height, std::size_t scene_width, std::size_t window,
                         std::size_t stride) {
    if (window == 0) throw ConfigError("slide_windows: window must be positive");
    if (stride == 0 || stride > window)
        throw ConfigError("slide_windows: stride must satisfy 1 <= stride <= window");
    if (scene_height < window || scene_width < window)
        throw DataError("slide_windows: scene " + std::to_string(scene_height) + "x" +
                        std::to_string(scene_width) + " smaller than window " +
                        std::to_string(window));

    WindowPlan plan;
    plan.window = window;
    plan.stride = stride;
    const auto rows = axis_origins(scene_height, window, stride);
    const auto cols = axis_origins(scene_width, window, stride);
    plan.origins.reserve(rows.size() * cols.size());
    for (std::size_t r : rows)
        for (std::size_t c : cols) plan.origins.emplace_back(r, c);
    return plan;
}

SceneRetrieval retrieve_scene(const WindowPredictor& predict, const GranuleScene& scene,
                              const WindowPlan& plan) {
    const std::size_t hs = scene.height(), ws = scene.width(), c = scene.channels();
    const std::size_t w = plan.window;

    ArrayD sum({hs, ws});
    Array<std::uint32_t> coverage({hs, ws});

    ArrayF window_values({c, w, w});
    MaskGrid window_valid({w, w});
    for (const auto& [oy, ox] : plan.origins) {
        if (oy + w > hs || ox + w > ws)
            throw DataError("retrieve_scene: window origin outside scene");
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < w; ++i)
                for (std::size_t j = 0; j < w; ++j)
                    window_values.at(ch, i, j) = scene.radiance.at(ch, oy + i, ox + j);
        for (std::size_t i = 0; i < w; ++i)
            for (std::size_t j = 0; j < w; ++j)
                window_valid.at(i, j) = scene.valid.at(oy + i, ox + j);

        const ArrayD pred = predict(window_values, window_valid);
        if (pred.rank() != 2 || pred.dim(0) != w || pred.dim(1) != w)
            throw DataError("retrieve_scene: predictor returned " + pred.shape_str() +
                            ", expected " + std::to_string(w) + "x" + std::to_string(w));
        for (std::size_t i = 0; i < w; ++i)
            for (std::size_t j = 0; j < w; ++j) {
                sum.at(oy + i, ox + j) += pred.at(i, j);
                ++coverage.at(oy + i, ox + j);
            }
    }

    SceneRetrieval out;
    out.aod = ArrayD({hs, ws});
    for (std::size_t p = 0; p < hs * ws; ++p) {
        if (coverage[p] == 0)
            throw NumericError("retrieve_scene: uncovered pixel despite plan invariant");
        out.aod[p] = sum[p] / static_cast<double>(coverage[p]);
    }
    out.coverage = std::move(coverage);
    out.valid = scene.valid;
    return out;
}

WindowPredictor make_model_predictor(const Regressor& model, const BandStats& stats) {
    if (stats.mean.empty() || stats.mean.size() != stats.stddev.size())
        throw DataError("make_model_predictor: checkpoint is missing band statistics");

    // the pixel DNN variants may consume a band subset of the scene spectrum
    std::vector<std::size_t> band_subset;
    if (const auto* dnn = dynamic_cast<const PixelDnn*>(&model)) {
        if (dnn->config().band_indices) band_subset = *dnn->config().band_indices;
    }

    return [&model, stats, band_subset](const ArrayF& window_values,
                                        const MaskGrid& window_valid) -> ArrayD {
        RadiancePatch patch;
        patch.values = window_values;
        patch.valid = window_valid;
        patch.wavelengths.resize(window_values.dim(0));
        for (std::size_t i = 0; i < patch.wavelengths.size(); ++i)
            patch.wavelengths[i] = static_cast<double>(i);  // placeholder ordering
        if (!band_subset.empty() && window_values.dim(0) != model.input_channels())
            patch = select_bands(patch, band_subset);
        if (patch.channels() != model.input_channels())
            throw DataError("predictor: window has " + std::to_string(patch.channels()) +
                            " channels, model expects " +
                            std::to_string(model.input_channels()));
        const RadiancePatch standardized = standardize(patch, stats);
        return model.forward(to_f64(standardized.values));
    };
}

}  // namespace hyperaod
