#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hyperaod/array.hpp"
#include "hyperaod/nn/param.hpp"

namespace hyperaod::nn {

// All layers compute in double. forward() is const and writes its
// intermediates into a caller-owned cache, so a frozen model can be shared
// read-only across threads; backward() accumulates into Parameter::grad and
// is a single-stream operation.

// y = x W^T + b, rows are samples
struct Linear {
    Parameter weight;  // out x in
    Parameter bias;    // out

    Linear(std::size_t in, std::size_t out)
        : weight({out, in}), bias({out}), in_(in), out_(out) {}

    std::size_t in_features() const { return in_; }
    std::size_t out_features() const { return out_; }

    void init(Rng& rng) { init_trunc_normal(weight, rng); init_zeros(bias); }
    void register_into(ParamRegistry& reg, const std::string& prefix) {
        reg.add(weight, prefix + ".weight");
        reg.add(bias, prefix + ".bias");
    }

    struct Cache {
        ArrayD input;  // N x in
    };

    ArrayD forward(const ArrayD& x, Cache* cache = nullptr) const;
    ArrayD backward(const Cache& cache, const ArrayD& dy);

private:
    std::size_t in_, out_;
};

// Normalization over the last dimension with affine scale/shift.
struct LayerNorm {
    Parameter gamma;
    Parameter beta;
    double eps = 1e-5;

    explicit LayerNorm(std::size_t dim) : gamma({dim}), beta({dim}), dim_(dim) {}

    std::size_t dim() const { return dim_; }

    void init() { init_ones(gamma); init_zeros(beta); }
    void register_into(ParamRegistry& reg, const std::string& prefix) {
        reg.add(gamma, prefix + ".gamma");
        reg.add(beta, prefix + ".beta");
    }

    struct Cache {
        ArrayD xhat;                 // N x dim
        std::vector<double> inv_std; // N
    };

    ArrayD forward(const ArrayD& x, Cache* cache = nullptr) const;
    ArrayD backward(const Cache& cache, const ArrayD& dy);

private:
    std::size_t dim_;
};

// Exact GELU: x * Phi(x)
struct Gelu {
    struct Cache {
        ArrayD input;
    };
    static ArrayD forward(const ArrayD& x, Cache* cache = nullptr);
    static ArrayD backward(const Cache& cache, const ArrayD& dy);
};

// Full self-attention over the token sequence; every token attends to every
// token across all groups.
struct MultiHeadSelfAttention {
    Linear wq, wk, wv, wo;
    std::size_t heads;

    MultiHeadSelfAttention(std::size_t dim, std::size_t n_heads)
        : wq(dim, dim), wk(dim, dim), wv(dim, dim), wo(dim, dim),
          heads(n_heads), dim_(dim) {
        if (n_heads == 0 || dim % n_heads != 0)
            throw ConfigError("attention: token_dim " + std::to_string(dim) +
                              " not divisible by num_heads " + std::to_string(n_heads));
    }

    void init(Rng& rng) { wq.init(rng); wk.init(rng); wv.init(rng); wo.init(rng); }
    void register_into(ParamRegistry& reg, const std::string& prefix) {
        wq.register_into(reg, prefix + ".wq");
        wk.register_into(reg, prefix + ".wk");
        wv.register_into(reg, prefix + ".wv");
        wo.register_into(reg, prefix + ".wo");
    }

    struct Cache {
        Linear::Cache qc, kc, vc, oc;
        ArrayD q, k, v;   // N x dim
        ArrayD attn;      // heads x N x N, softmax weights
        ArrayD concat;    // N x dim, pre-output-projection
    };

    ArrayD forward(const ArrayD& x, Cache* cache = nullptr) const;
    ArrayD backward(const Cache& cache, const ArrayD& dy);

private:
    std::size_t dim_;
};

struct Mlp {
    Linear fc1, fc2;

    Mlp(std::size_t dim, std::size_t hidden) : fc1(dim, hidden), fc2(hidden, dim) {}

    void init(Rng& rng) { fc1.init(rng); fc2.init(rng); }
    void register_into(ParamRegistry& reg, const std::string& prefix) {
        fc1.register_into(reg, prefix + ".fc1");
        fc2.register_into(reg, prefix + ".fc2");
    }

    struct Cache {
        Linear::Cache c1, c2;
        Gelu::Cache g;
    };

    ArrayD forward(const ArrayD& x, Cache* cache = nullptr) const;
    ArrayD backward(const Cache& cache, const ArrayD& dy);
};

// Post-norm transformer block: y = LN1(x + MHSA(x)); z = LN2(y + MLP(y))
struct EncoderBlock {
    MultiHeadSelfAttention attn;
    LayerNorm ln1;
    Mlp mlp;
    LayerNorm ln2;

    EncoderBlock(std::size_t dim, std::size_t n_heads, std::size_t mlp_hidden)
        : attn(dim, n_heads), ln1(dim), mlp(dim, mlp_hidden), ln2(dim) {}

    void init(Rng& rng) { attn.init(rng); ln1.init(); mlp.init(rng); ln2.init(); }
    void register_into(ParamRegistry& reg, const std::string& prefix) {
        attn.register_into(reg, prefix + ".attn");
        ln1.register_into(reg, prefix + ".ln1");
        mlp.register_into(reg, prefix + ".mlp");
        ln2.register_into(reg, prefix + ".ln2");
    }

    struct Cache {
        MultiHeadSelfAttention::Cache ac;
        LayerNorm::Cache l1, l2;
        Mlp::Cache mc;
    };

    ArrayD forward(const ArrayD& x, Cache* cache = nullptr) const;
    ArrayD backward(const Cache& cache, const ArrayD& dz);
};

// 2-D convolution, stride 1, odd square kernel, zero padding keeps H x W.
struct Conv2d {
    Parameter weight;  // out x (in*k*k)
    Parameter bias;    // out

    Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel)
        : weight({out_ch, in_ch * kernel * kernel}), bias({out_ch}),
          in_ch_(in_ch), out_ch_(out_ch), k_(kernel) {
        if (kernel % 2 == 0) throw ConfigError("Conv2d: kernel must be odd");
    }

    std::size_t in_channels() const { return in_ch_; }
    std::size_t out_channels() const { return out_ch_; }

    void init(Rng& rng) { init_he_normal(weight, rng, in_ch_ * k_ * k_); init_zeros(bias); }
    void register_into(ParamRegistry& reg, const std::string& prefix) {
        reg.add(weight, prefix + ".weight");
        reg.add(bias, prefix + ".bias");
    }

    struct Cache {
        ArrayD cols;  // (H*W) x (in*k*k)
        std::size_t h = 0, w = 0;
    };

    // x: in x H x W -> out x H x W
    ArrayD forward(const ArrayD& x, Cache* cache = nullptr) const;
    ArrayD backward(const Cache& cache, const ArrayD& dy);

private:
    std::size_t in_ch_, out_ch_, k_;
};

// Bilinear x2 upsampling, half-pixel-center convention, edges clamped.
struct BilinearUpsample2x {
    struct Cache {
        std::size_t h = 0, w = 0;
    };
    // x: C x H x W -> C x 2H x 2W
    static ArrayD forward(const ArrayD& x, Cache* cache = nullptr);
    static ArrayD backward(const Cache& cache, const ArrayD& dy);
};

// LayerNorm across the channel dimension at each spatial position of a
// C x H x W feature map.
struct ChannelNorm {
    LayerNorm ln;

    explicit ChannelNorm(std::size_t channels) : ln(channels) {}

    void init() { ln.init(); }
    void register_into(ParamRegistry& reg, const std::string& prefix) {
        ln.register_into(reg, prefix);
    }

    struct Cache {
        LayerNorm::Cache lc;
        std::size_t h = 0, w = 0;
    };

    ArrayD forward(const ArrayD& x, Cache* cache = nullptr) const;
    ArrayD backward(const Cache& cache, const ArrayD& dy);
};

// Shared GEMM helpers (Eigen-backed).
ArrayD matmul(const ArrayD& a, const ArrayD& b);            // (m x k)(k x n)
ArrayD matmul_nt(const ArrayD& a, const ArrayD& b);          // a * b^T
ArrayD matmul_tn(const ArrayD& a, const ArrayD& b);          // a^T * b

}  // namespace hyperaod::nn
