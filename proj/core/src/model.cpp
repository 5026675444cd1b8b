#include "hyperaod/model.hpp"

#include <cmath>
#include <utility>

namespace hyperaod {

// ---------------------------------------------------------------- config

std::size_t ViTCGConfig::mlp_hidden() const {
    return static_cast<std::size_t>(std::llround(static_cast<double>(token_dim) * mlp_ratio));
}

std::size_t ViTCGConfig::upsample_stages() const {
    std::size_t stages = 0, v = patch;
    while (v > 1) {
        if (v % 2 != 0)
            throw ConfigError("patch size " + std::to_string(patch) +
                              " is not a power of two; the x2 upsampling chain cannot reach it");
        v /= 2;
        ++stages;
    }
    return stages;
}

void ViTCGConfig::validate() const {
    if (channels == 0 || groups == 0 || spatial == 0 || patch == 0 || token_dim == 0 ||
        depth == 0 || heads == 0)
        throw ConfigError("ViTCG config: all size fields must be positive");
    if (channels % groups != 0)
        throw ConfigError("channel count C=" + std::to_string(channels) +
                          " is not divisible by group count G=" + std::to_string(groups));
    if (spatial % patch != 0)
        throw ConfigError("spatial size H=" + std::to_string(spatial) +
                          " is not divisible by patch size p=" + std::to_string(patch));
    if (token_dim % heads != 0)
        throw ConfigError("token_dim D=" + std::to_string(token_dim) +
                          " is not divisible by num_heads=" + std::to_string(heads));
    if (mlp_ratio <= 0.0 || mlp_hidden() == 0)
        throw ConfigError("mlp_ratio must be positive");
    const std::size_t stages = upsample_stages();
    if (decoder_channels.size() != stages + 1)
        throw ConfigError("decoder_channels must have log2(p)+1 = " +
                          std::to_string(stages + 1) + " entries, got " +
                          std::to_string(decoder_channels.size()));
    for (std::size_t i = 0; i < decoder_channels.size(); ++i) {
        if (decoder_channels[i] == 0)
            throw ConfigError("decoder_channels entries must be positive");
        if (i > 0 && decoder_channels[i] > decoder_channels[i - 1])
            throw ConfigError("decoder_channels must be non-increasing");
    }
    if (norm_style != "post")
        throw ConfigError("unsupported norm_style '" + norm_style + "' (only 'post')");
}

nlohmann::json ViTCGConfig::to_json() const {
    return nlohmann::json{{"channels", channels},
                          {"groups", groups},
                          {"spatial", spatial},
                          {"patch", patch},
                          {"token_dim", token_dim},
                          {"depth", depth},
                          {"heads", heads},
                          {"mlp_ratio", mlp_ratio},
                          {"decoder_channels", decoder_channels},
                          {"norm_style", norm_style}};
}

ViTCGConfig ViTCGConfig::from_json(const nlohmann::json& j) {
    ViTCGConfig c;
    c.channels = j.at("channels").get<std::size_t>();
    c.groups = j.at("groups").get<std::size_t>();
    c.spatial = j.at("spatial").get<std::size_t>();
    c.patch = j.at("patch").get<std::size_t>();
    c.token_dim = j.at("token_dim").get<std::size_t>();
    c.depth = j.at("depth").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.mlp_ratio = j.at("mlp_ratio").get<double>();
    c.decoder_channels = j.at("decoder_channels").get<std::vector<std::size_t>>();
    c.norm_style = j.value("norm_style", std::string("post"));
    c.validate();
    return c;
}

// ------------------------------------------------------ channel grouping

template <typename T>
Array<T> group_channels(const Array<T>& x, std::size_t groups) {
    if (x.rank() != 3) throw DataError("group_channels: expected C x H x W input");
    const std::size_t c = x.dim(0);
    if (groups == 0 || c % groups != 0)
        throw ConfigError("channel count C=" + std::to_string(c) +
                          " is not divisible by group count G=" + std::to_string(groups));
    // contiguous spectral blocks in row-major CHW are already contiguous in
    // memory, so grouping is a shape change over the same element order
    Array<T> out;
    out.shape = {groups, c / groups, x.dim(1), x.dim(2)};
    out.data = x.data;
    return out;
}

template <typename T>
Array<T> ungroup_channels(const Array<T>& grouped) {
    if (grouped.rank() != 4) throw DataError("ungroup_channels: expected G x C/G x H x W");
    Array<T> out;
    out.shape = {grouped.dim(0) * grouped.dim(1), grouped.dim(2), grouped.dim(3)};
    out.data = grouped.data;
    return out;
}

template Array<float> group_channels<float>(const Array<float>&, std::size_t);
template Array<double> group_channels<double>(const Array<double>&, std::size_t);
template Array<float> ungroup_channels<float>(const Array<float>&);
template Array<double> ungroup_channels<double>(const Array<double>&);

// --------------------------------------------------------- count formula

std::size_t count_parameters(const ViTCGConfig& cfg) {
    cfg.validate();
    const std::size_t d = cfg.token_dim;
    const std::size_t dh = cfg.mlp_hidden();
    std::size_t n = 0;
    n += cfg.patch_dim() * d + d;                       // patch embedding
    n += cfg.tokens_per_group() * d + cfg.groups * d;   // spatial + group PE
    std::size_t block = 4 * (d * d + d);                // q, k, v, o
    block += 2 * 2 * d;                                 // ln1, ln2
    block += d * dh + dh + dh * d + d;                  // mlp
    n += cfg.depth * block;
    const auto& dec = cfg.decoder_channels;
    n += d * dec[0] + dec[0];                           // proj1
    n += dec[0] * dec[0] + dec[0];                      // proj2
    for (std::size_t i = 0; i + 1 < dec.size(); ++i)
        n += dec[i] * 9 * dec[i + 1] + dec[i + 1]       // 3x3 conv
             + 2 * dec[i + 1];                          // channel norm
    n += dec.back() + 1;                                // 1x1 head
    return n;
}

// ------------------------------------------------------------------ model

struct ViTCG::TraceImpl : Regressor::Trace {
    nn::Linear::Cache embed_c;
    std::vector<nn::EncoderBlock::Cache> block_c;
    nn::Linear::Cache p1_c, p2_c;
    nn::Gelu::Cache pg_c;
    std::vector<nn::BilinearUpsample2x::Cache> up_c;
    std::vector<nn::Conv2d::Cache> conv_c;
    std::vector<nn::ChannelNorm::Cache> norm_c;
    std::vector<nn::Gelu::Cache> act_c;
    nn::Conv2d::Cache head_c;
};

ViTCG::ViTCG(ViTCGConfig cfg, std::uint64_t seed)
    : cfg_((cfg.validate(), std::move(cfg))),
      embed_(cfg_.patch_dim(), cfg_.token_dim),
      spatial_pe_({cfg_.tokens_per_group(), cfg_.token_dim}),
      group_pe_({cfg_.groups, cfg_.token_dim}),
      proj1_(cfg_.token_dim, cfg_.decoder_channels[0]),
      proj2_(cfg_.decoder_channels[0], cfg_.decoder_channels[0]),
      head_(cfg_.decoder_channels.back(), 1, 1) {
    const std::size_t stages = cfg_.upsample_stages();
    blocks_.reserve(cfg_.depth);
    for (std::size_t i = 0; i < cfg_.depth; ++i)
        blocks_.emplace_back(cfg_.token_dim, cfg_.heads, cfg_.mlp_hidden());
    stage_convs_.reserve(stages);
    stage_norms_.reserve(stages);
    for (std::size_t i = 0; i < stages; ++i) {
        stage_convs_.emplace_back(cfg_.decoder_channels[i], cfg_.decoder_channels[i + 1], 3);
        stage_norms_.emplace_back(cfg_.decoder_channels[i + 1]);
    }

    Rng rng(seed);
    embed_.init(rng);
    nn::init_trunc_normal(spatial_pe_, rng);
    nn::init_trunc_normal(group_pe_, rng);
    for (auto& b : blocks_) b.init(rng);
    proj1_.init(rng);
    proj2_.init(rng);
    for (auto& c : stage_convs_) c.init(rng);
    for (auto& n : stage_norms_) n.init();
    head_.init(rng);

    embed_.register_into(reg_, "embed");
    reg_.add(spatial_pe_, "pos.spatial");
    reg_.add(group_pe_, "pos.group");
    for (std::size_t i = 0; i < blocks_.size(); ++i)
        blocks_[i].register_into(reg_, "encoder.block" + std::to_string(i));
    proj1_.register_into(reg_, "decoder.proj1");
    proj2_.register_into(reg_, "decoder.proj2");
    for (std::size_t i = 0; i < stage_convs_.size(); ++i) {
        stage_convs_[i].register_into(reg_, "decoder.stage" + std::to_string(i) + ".conv");
        stage_norms_[i].register_into(reg_, "decoder.stage" + std::to_string(i) + ".norm");
    }
    head_.register_into(reg_, "decoder.head");
}

std::unique_ptr<Regressor::Trace> ViTCG::make_trace() const {
    return std::make_unique<TraceImpl>();
}

TokenSequence ViTCG::embed_patches(const ArrayD& grouped, nn::Linear::Cache* cache) const {
    if (grouped.rank() != 4 || grouped.dim(0) != cfg_.groups ||
        grouped.dim(1) != cfg_.group_channels_each() || grouped.dim(2) != cfg_.spatial ||
        grouped.dim(3) != cfg_.spatial)
        throw DataError("embed_patches: grouped input " + grouped.shape_str() +
                        " inconsistent with config");
    const std::size_t g = cfg_.groups, cg = cfg_.group_channels_each();
    const std::size_t p = cfg_.patch, ng = cfg_.grid();
    const std::size_t pd = cfg_.patch_dim();

    ArrayD rows({cfg_.n_tokens(), pd});
    TokenSequence seq;
    seq.group_index.resize(cfg_.n_tokens());
    seq.grid_position.resize(cfg_.n_tokens());
    std::size_t t = 0;
    for (std::size_t gi = 0; gi < g; ++gi) {
        for (std::size_t pi = 0; pi < ng; ++pi) {
            for (std::size_t pj = 0; pj < ng; ++pj, ++t) {
                double* row = &rows.data[t * pd];
                std::size_t k = 0;
                for (std::size_t c = 0; c < cg; ++c)
                    for (std::size_t r = 0; r < p; ++r)
                        for (std::size_t q = 0; q < p; ++q, ++k)
                            row[k] = grouped.at(gi, c, pi * p + r, pj * p + q);
                seq.group_index[t] = gi;
                seq.grid_position[t] = {pi, pj};
            }
        }
    }
    seq.tokens = embed_.forward(rows, cache);
    return seq;
}

TokenSequence ViTCG::add_positional(TokenSequence seq) const {
    const std::size_t d = cfg_.token_dim, ng = cfg_.grid();
    for (std::size_t t = 0; t < seq.count(); ++t) {
        const std::size_t sp = seq.grid_position[t][0] * ng + seq.grid_position[t][1];
        const std::size_t gp = seq.group_index[t];
        for (std::size_t j = 0; j < d; ++j)
            seq.tokens.at(t, j) += spatial_pe_.value.at(sp, j) + group_pe_.value.at(gp, j);
    }
    return seq;
}

TokenSequence ViTCG::encode(TokenSequence seq,
                            std::vector<nn::EncoderBlock::Cache>* caches) const {
    if (seq.tokens.dim(1) != cfg_.token_dim)
        throw DataError("encode: token dim mismatch");
    if (caches) caches->resize(blocks_.size());
    for (std::size_t i = 0; i < blocks_.size(); ++i)
        seq.tokens = blocks_[i].forward(seq.tokens, caches ? &(*caches)[i] : nullptr);
    return seq;
}

ArrayD ViTCG::decode(const TokenSequence& seq, TraceImpl* trace) const {
    const std::size_t d = cfg_.token_dim, ng = cfg_.grid(), g = cfg_.groups;
    const std::size_t q = cfg_.tokens_per_group();
    if (seq.count() != cfg_.n_tokens())
        throw DataError("decode: token count mismatch");

    // group-mean fusion at each grid position
    ArrayD fused({q, d});
    const double inv_g = 1.0 / static_cast<double>(g);
    for (std::size_t gi = 0; gi < g; ++gi)
        for (std::size_t qi = 0; qi < q; ++qi)
            for (std::size_t j = 0; j < d; ++j)
                fused.at(qi, j) += seq.tokens.at(gi * q + qi, j) * inv_g;

    ArrayD h1 = proj1_.forward(fused, trace ? &trace->p1_c : nullptr);
    ArrayD a = nn::Gelu::forward(h1, trace ? &trace->pg_c : nullptr);
    ArrayD h2 = proj2_.forward(a, trace ? &trace->p2_c : nullptr);

    const std::size_t dec0 = cfg_.decoder_channels[0];
    ArrayD x({dec0, ng, ng});
    for (std::size_t ch = 0; ch < dec0; ++ch)
        for (std::size_t qi = 0; qi < q; ++qi)
            x.data[ch * q + qi] = h2.at(qi, ch);

    const std::size_t stages = stage_convs_.size();
    if (trace) {
        trace->up_c.resize(stages);
        trace->conv_c.resize(stages);
        trace->norm_c.resize(stages);
        trace->act_c.resize(stages);
    }
    for (std::size_t s = 0; s < stages; ++s) {
        x = nn::BilinearUpsample2x::forward(x, trace ? &trace->up_c[s] : nullptr);
        x = stage_convs_[s].forward(x, trace ? &trace->conv_c[s] : nullptr);
        x = stage_norms_[s].forward(x, trace ? &trace->norm_c[s] : nullptr);
        x = nn::Gelu::forward(x, trace ? &trace->act_c[s] : nullptr);
    }

    ArrayD out = head_.forward(x, trace ? &trace->head_c : nullptr);  // 1 x H x W
    out.shape = {cfg_.spatial, cfg_.spatial};
    return out;
}

ArrayD ViTCG::forward(const ArrayD& x, Trace* trace) const {
    if (x.rank() != 3 || x.dim(0) != cfg_.channels || x.dim(1) != cfg_.spatial ||
        x.dim(2) != cfg_.spatial)
        throw DataError("ViTCG::forward: input " + x.shape_str() + " inconsistent with config");
    auto* t = dynamic_cast<TraceImpl*>(trace);
    if (trace && !t) throw DataError("ViTCG::forward: foreign trace object");

    ArrayD grouped = group_channels(x, cfg_.groups);
    TokenSequence seq = embed_patches(grouped, t ? &t->embed_c : nullptr);
    seq = add_positional(std::move(seq));
    seq = encode(std::move(seq), t ? &t->block_c : nullptr);
    return decode(seq, t);
}

void ViTCG::backward(Trace& trace, const ArrayD& d_out) {
    auto& t = dynamic_cast<TraceImpl&>(trace);
    const std::size_t d = cfg_.token_dim, ng = cfg_.grid(), g = cfg_.groups;
    const std::size_t q = cfg_.tokens_per_group();

    ArrayD dy = d_out;
    dy.shape = {1, cfg_.spatial, cfg_.spatial};
    ArrayD dx = head_.backward(t.head_c, dy);
    for (std::size_t s = stage_convs_.size(); s-- > 0;) {
        dx = nn::Gelu::backward(t.act_c[s], dx);
        dx = stage_norms_[s].backward(t.norm_c[s], dx);
        dx = stage_convs_[s].backward(t.conv_c[s], dx);
        dx = nn::BilinearUpsample2x::backward(t.up_c[s], dx);
    }

    const std::size_t dec0 = cfg_.decoder_channels[0];
    ArrayD dh2({q, dec0});
    for (std::size_t ch = 0; ch < dec0; ++ch)
        for (std::size_t qi = 0; qi < q; ++qi)
            dh2.at(qi, ch) = dx.data[ch * q + qi];

    ArrayD da = proj2_.backward(t.p2_c, dh2);
    ArrayD dh1 = nn::Gelu::backward(t.pg_c, da);
    ArrayD dfused = proj1_.backward(t.p1_c, dh1);

    ArrayD dtok({cfg_.n_tokens(), d});
    const double inv_g = 1.0 / static_cast<double>(g);
    for (std::size_t gi = 0; gi < g; ++gi)
        for (std::size_t qi = 0; qi < q; ++qi)
            for (std::size_t j = 0; j < d; ++j)
                dtok.at(gi * q + qi, j) = dfused.at(qi, j) * inv_g;

    for (std::size_t i = blocks_.size(); i-- > 0;)
        dtok = blocks_[i].backward(t.block_c[i], dtok);

    // positional tables
    for (std::size_t tk = 0; tk < cfg_.n_tokens(); ++tk) {
        const std::size_t gi = tk / q;
        const std::size_t qi = tk % q;
        const std::size_t sp = (qi / ng) * ng + (qi % ng);
        for (std::size_t j = 0; j < d; ++j) {
            spatial_pe_.grad.at(sp, j) += dtok.at(tk, j);
            group_pe_.grad.at(gi, j) += dtok.at(tk, j);
        }
    }

    embed_.backward(t.embed_c, dtok);  // input gradient discarded
}

}  // namespace hyperaod
