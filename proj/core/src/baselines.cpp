#include "hyperaod/baselines.hpp"

namespace hyperaod {

void PixelDNNConfig::validate(std::size_t total_bands) const {
    if (input_bands == 0) throw ConfigError("pixel DNN: input_bands must be positive");
    if (hidden_sizes.empty()) throw ConfigError("pixel DNN: hidden_sizes must be non-empty");
    for (std::size_t h : hidden_sizes)
        if (h == 0) throw ConfigError("pixel DNN: hidden sizes must be positive");
    if (band_indices) {
        if (band_indices->size() != input_bands)
            throw ConfigError("pixel DNN: band_indices length " +
                              std::to_string(band_indices->size()) + " != input_bands " +
                              std::to_string(input_bands));
        for (std::size_t i = 0; i < band_indices->size(); ++i) {
            if ((*band_indices)[i] >= total_bands)
                throw ConfigError("pixel DNN: band index " + std::to_string((*band_indices)[i]) +
                                  " out of range [0, " + std::to_string(total_bands) + ")");
            if (i > 0 && (*band_indices)[i] <= (*band_indices)[i - 1])
                throw ConfigError("pixel DNN: band_indices must be strictly increasing");
        }
    }
}

nlohmann::json PixelDNNConfig::to_json() const {
    nlohmann::json j{{"input_bands", input_bands}, {"hidden_sizes", hidden_sizes}};
    if (band_indices) j["band_indices"] = *band_indices;
    return j;
}

PixelDNNConfig PixelDNNConfig::from_json(const nlohmann::json& j) {
    PixelDNNConfig c;
    c.input_bands = j.at("input_bands").get<std::size_t>();
    c.hidden_sizes = j.at("hidden_sizes").get<std::vector<std::size_t>>();
    if (j.contains("band_indices") && !j["band_indices"].is_null())
        c.band_indices = j["band_indices"].get<std::vector<std::size_t>>();
    return c;
}

RadiancePatch select_bands(const RadiancePatch& patch, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw ConfigError("select_bands: empty index list");
    const std::size_t c = patch.channels();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= c)
            throw ConfigError("select_bands: index " + std::to_string(indices[i]) +
                              " out of range [0, " + std::to_string(c) + ")");
        if (i > 0 && indices[i] <= indices[i - 1])
            throw ConfigError("select_bands: indices must be strictly increasing");
    }
    const std::size_t h = patch.height(), w = patch.width();
    RadiancePatch out;
    out.values = ArrayF({indices.size(), h, w});
    out.valid = patch.valid;
    out.wavelengths.reserve(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const float* src = &patch.values.data[indices[k] * h * w];
        float* dst = &out.values.data[k * h * w];
        std::copy(src, src + h * w, dst);
        out.wavelengths.push_back(patch.wavelengths[indices[k]]);
    }
    return out;
}

std::vector<std::size_t> even_band_indices(std::size_t total, std::size_t k) {
    if (k == 0 || k > total)
        throw ConfigError("even_band_indices: cannot pick " + std::to_string(k) + " of " +
                          std::to_string(total));
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i)
        out[i] = (i * (total - 1)) / (k > 1 ? k - 1 : 1);
    // strictly increasing by construction when k <= total
    return out;
}

struct PixelDnn::TraceImpl : Regressor::Trace {
    std::vector<nn::Linear::Cache> lin_c;
    std::vector<nn::Gelu::Cache> act_c;
    std::size_t h = 0, w = 0;
};

PixelDnn::PixelDnn(PixelDNNConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate(cfg_.band_indices ? (cfg_.band_indices->back() + 1) : cfg_.input_bands);
    std::size_t in = cfg_.input_bands;
    for (std::size_t hsize : cfg_.hidden_sizes) {
        layers_.emplace_back(in, hsize);
        in = hsize;
    }
    layers_.emplace_back(in, 1);  // scalar head

    Rng rng(seed);
    for (auto& l : layers_) l.init(rng);
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i)
        layers_[i].register_into(reg_, "mlp.fc" + std::to_string(i));
    layers_.back().register_into(reg_, "mlp.head");
}

std::unique_ptr<Regressor::Trace> PixelDnn::make_trace() const {
    return std::make_unique<TraceImpl>();
}

ArrayD PixelDnn::forward(const ArrayD& x, Trace* trace) const {
    if (x.rank() != 3 || x.dim(0) != cfg_.input_bands)
        throw DataError("PixelDnn::forward: expected " + std::to_string(cfg_.input_bands) +
                        " x H x W input, got " + x.shape_str());
    auto* t = dynamic_cast<TraceImpl*>(trace);
    if (trace && !t) throw DataError("PixelDnn::forward: foreign trace object");
    const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const std::size_t n = h * w;

    // pixels become rows
    ArrayD rows({n, c});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < n; ++p) rows.at(p, ch) = x.data[ch * n + p];

    if (t) {
        t->lin_c.resize(layers_.size());
        t->act_c.resize(layers_.size() - 1);
        t->h = h;
        t->w = w;
    }
    ArrayD cur = std::move(rows);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        cur = layers_[i].forward(cur, t ? &t->lin_c[i] : nullptr);
        if (i + 1 < layers_.size()) cur = nn::Gelu::forward(cur, t ? &t->act_c[i] : nullptr);
    }

    ArrayD out({h, w});
    for (std::size_t p = 0; p < n; ++p) out[p] = cur.at(p, 0);
    return out;
}

void PixelDnn::backward(Trace& trace, const ArrayD& d_out) {
    auto& t = dynamic_cast<TraceImpl&>(trace);
    const std::size_t n = t.h * t.w;
    ArrayD d({n, 1});
    for (std::size_t p = 0; p < n; ++p) d.at(p, 0) = d_out[p];
    for (std::size_t i = layers_.size(); i-- > 0;) {
        d = layers_[i].backward(t.lin_c[i], d);
        if (i > 0) d = nn::Gelu::backward(t.act_c[i - 1], d);
    }
}

}  // namespace hyperaod
