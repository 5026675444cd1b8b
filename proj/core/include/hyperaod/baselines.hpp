#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include <json.hpp>

#include "hyperaod/nn/layers.hpp"
#include "hyperaod/regressor.hpp"
#include "hyperaod/types.hpp"

namespace hyperaod {

// Pixel-wise 1-D DNN baseline (DNN_8w / DNN_291w).
struct PixelDNNConfig {
    std::size_t input_bands = 291;
    std::vector<std::size_t> hidden_sizes{256, 128, 64};
    std::optional<std::vector<std::size_t>> band_indices;  // into the full band list

    void validate(std::size_t total_bands) const;  // throws ConfigError
    nlohmann::json to_json() const;
    static PixelDNNConfig from_json(const nlohmann::json& j);
};

// Returns a patch holding exactly the selected channels; mask unchanged.
// Indices must be strictly increasing and in range.
RadiancePatch select_bands(const RadiancePatch& patch, const std::vector<std::size_t>& indices);

// Default band subset: k evenly spaced indices across [0, total).
std::vector<std::size_t> even_band_indices(std::size_t total, std::size_t k);

// The same MLP applied independently to the spectrum at every pixel.
class PixelDnn : public Regressor {
public:
    PixelDnn(PixelDNNConfig cfg, std::uint64_t seed);

    const PixelDNNConfig& config() const { return cfg_; }

    struct TraceImpl;
    std::unique_ptr<Trace> make_trace() const override;

    ArrayD forward(const ArrayD& x, Trace* trace = nullptr) const override;
    void backward(Trace& trace, const ArrayD& d_out) override;

    nn::ParamRegistry& params() override { return reg_; }
    const nn::ParamRegistry& params() const override { return reg_; }
    std::string kind() const override { return "pixel_dnn"; }
    nlohmann::json config_json() const override { return cfg_.to_json(); }
    std::size_t input_channels() const override { return cfg_.input_bands; }

private:
    PixelDNNConfig cfg_;
    nn::ParamRegistry reg_;
    std::vector<nn::Linear> layers_;  // hidden stack + scalar head
};

}  // namespace hyperaod
