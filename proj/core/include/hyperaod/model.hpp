#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

#include <json.hpp>

#include "hyperaod/array.hpp"
#include "hyperaod/common.hpp"
#include "hyperaod/nn/layers.hpp"
#include "hyperaod/regressor.hpp"

namespace hyperaod {

// Every architectural hyperparameter; the single source of truth for shapes
// and the parameter count.
struct ViTCGConfig {
    std::size_t channels = 291;    // C
    std::size_t groups = 3;        // G, contiguous spectral blocks
    std::size_t spatial = 96;      // H = W
    std::size_t patch = 8;         // p
    std::size_t token_dim = 384;   // D
    std::size_t depth = 4;         // encoder blocks
    std::size_t heads = 8;
    double mlp_ratio = 4.0;
    std::vector<std::size_t> decoder_channels{256, 128, 64, 32};
    std::string norm_style = "post";

    std::size_t group_channels_each() const { return channels / groups; }
    std::size_t grid() const { return spatial / patch; }
    std::size_t tokens_per_group() const { return grid() * grid(); }
    std::size_t n_tokens() const { return groups * tokens_per_group(); }
    std::size_t patch_dim() const { return group_channels_each() * patch * patch; }
    std::size_t mlp_hidden() const;
    std::size_t upsample_stages() const;  // log2(patch), validated integral

    void validate() const;  // throws ConfigError
    nlohmann::json to_json() const;
    static ViTCGConfig from_json(const nlohmann::json& j);
};

// Tokens plus their provenance. Tokens of one group form a contiguous block
// ordered row-major by grid position.
struct TokenSequence {
    ArrayD tokens;                                   // N_tok x D
    std::vector<std::size_t> group_index;            // N_tok
    std::vector<std::array<std::size_t, 2>> grid_position;  // N_tok (row, col)

    std::size_t count() const { return tokens.dim(0); }
};

// Pure reindexing of C x H x W into G x (C/G) x H x W contiguous spectral
// blocks; ungroup restores the input bit-exactly.
template <typename T>
Array<T> group_channels(const Array<T>& x, std::size_t groups);
template <typename T>
Array<T> ungroup_channels(const Array<T>& grouped);

// Exact number of learnable scalars, from config arithmetic alone.
std::size_t count_parameters(const ViTCGConfig& cfg);

class ViTCG : public Regressor {
public:
    ViTCG(ViTCGConfig cfg, std::uint64_t seed);

    const ViTCGConfig& config() const { return cfg_; }

    struct TraceImpl;
    std::unique_ptr<Trace> make_trace() const override;

    // Stage operations (eval mode when no trace cache is passed).
    TokenSequence embed_patches(const ArrayD& grouped, nn::Linear::Cache* cache = nullptr) const;
    TokenSequence add_positional(TokenSequence seq) const;
    TokenSequence encode(TokenSequence seq,
                         std::vector<nn::EncoderBlock::Cache>* caches = nullptr) const;
    ArrayD decode(const TokenSequence& seq, TraceImpl* trace = nullptr) const;

    ArrayD forward(const ArrayD& x, Trace* trace = nullptr) const override;
    void backward(Trace& trace, const ArrayD& d_out) override;

    nn::ParamRegistry& params() override { return reg_; }
    const nn::ParamRegistry& params() const override { return reg_; }
    std::string kind() const override { return "vitcg"; }
    nlohmann::json config_json() const override { return cfg_.to_json(); }
    std::size_t input_channels() const override { return cfg_.channels; }

    std::size_t parameter_count() const { return reg_.total_size(); }

private:
    ViTCGConfig cfg_;
    nn::ParamRegistry reg_;

    nn::Linear embed_;
    nn::Parameter spatial_pe_;  // grid*grid x D, shared across groups
    nn::Parameter group_pe_;    // G x D
    std::vector<nn::EncoderBlock> blocks_;
    nn::Linear proj1_, proj2_;  // token MLP D -> dec0 -> dec0
    std::vector<nn::Conv2d> stage_convs_;
    std::vector<nn::ChannelNorm> stage_norms_;
    nn::Conv2d head_;
};

}  // namespace hyperaod
