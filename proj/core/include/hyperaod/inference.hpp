#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "hyperaod/array.hpp"
#include "hyperaod/regressor.hpp"
#include "hyperaod/types.hpp"

namespace hyperaod {

// Window origins covering the scene: a regular stride grid plus, when the
// grid does not reach the border, a final origin snapped to scene - window.
struct WindowPlan {
    std::vector<std::pair<std::size_t, std::size_t>> origins;  // (row, col)
    std::size_t window = 96;
    std::size_t stride = 96;
};

WindowPlan slide_windows(std::size_t scene_height, std::size_t scene_width,
                         std::size_t window, std::size_t stride);

// Evaluates one window: raw radiance C x w x w plus its validity mask, in
// scene units; returns a w x w prediction.
using WindowPredictor =
    std::function<ArrayD(const ArrayF& window_radiance, const MaskGrid& window_valid)>;

struct SceneRetrieval {
    ArrayD aod;                     // Hs x Ws, mean of covering windows
    Array<std::uint32_t> coverage;  // windows contributing per pixel, >= 1
    MaskGrid valid;                 // propagated scene validity
};

// Runs the predictor on every planned window and blends overlaps by uniform
// mean with 64-bit accumulation; order-independent.
SceneRetrieval retrieve_scene(const WindowPredictor& predict, const GranuleScene& scene,
                              const WindowPlan& plan);

// Wraps a trained model: standardizes each window with the checkpoint's band
// statistics (selecting the model's band subset first when it uses one).
WindowPredictor make_model_predictor(const Regressor& model, const BandStats& stats);

}  // namespace hyperaod
