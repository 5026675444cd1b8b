#include "hyperaod/nn/layers.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace hyperaod::nn {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapCM = Eigen::Map<const MatRM>;

namespace {

MapCM as_matrix(const ArrayD& a, std::size_t rows, std::size_t cols) {
    return MapCM(a.data.data(), static_cast<Eigen::Index>(rows),
                 static_cast<Eigen::Index>(cols));
}

MapM as_matrix(ArrayD& a, std::size_t rows, std::size_t cols) {
    return MapM(a.data.data(), static_cast<Eigen::Index>(rows),
                static_cast<Eigen::Index>(cols));
}

void check_2d(const ArrayD& a, const char* who) {
    if (a.rank() != 2) throw DataError(std::string(who) + ": expected 2-d input, got " + a.shape_str());
}

}  // namespace

ArrayD matmul(const ArrayD& a, const ArrayD& b) {
    ArrayD out({a.dim(0), b.dim(1)});
    as_matrix(out, a.dim(0), b.dim(1)).noalias() =
        as_matrix(a, a.dim(0), a.dim(1)) * as_matrix(b, b.dim(0), b.dim(1));
    return out;
}

ArrayD matmul_nt(const ArrayD& a, const ArrayD& b) {
    ArrayD out({a.dim(0), b.dim(0)});
    as_matrix(out, a.dim(0), b.dim(0)).noalias() =
        as_matrix(a, a.dim(0), a.dim(1)) * as_matrix(b, b.dim(0), b.dim(1)).transpose();
    return out;
}

ArrayD matmul_tn(const ArrayD& a, const ArrayD& b) {
    ArrayD out({a.dim(1), b.dim(1)});
    as_matrix(out, a.dim(1), b.dim(1)).noalias() =
        as_matrix(a, a.dim(0), a.dim(1)).transpose() * as_matrix(b, b.dim(0), b.dim(1));
    return out;
}

// ---------------------------------------------------------------- Linear

ArrayD Linear::forward(const ArrayD& x, Cache* cache) const {
    check_2d(x, "Linear");
    if (x.dim(1) != in_)
        throw DataError("Linear: input features " + std::to_string(x.dim(1)) +
                        " != " + std::to_string(in_));
    const std::size_t n = x.dim(0);
    ArrayD y({n, out_});
    as_matrix(y, n, out_).noalias() =
        as_matrix(x, n, in_) * as_matrix(weight.value, out_, in_).transpose();
    auto ym = as_matrix(y, n, out_);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < out_; ++j) ym(i, j) += bias.value[j];
    if (cache) cache->input = x;
    return y;
}

ArrayD Linear::backward(const Cache& cache, const ArrayD& dy) {
    const std::size_t n = dy.dim(0);
    as_matrix(weight.grad, out_, in_).noalias() +=
        as_matrix(dy, n, out_).transpose() * as_matrix(cache.input, n, in_);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < out_; ++j) bias.grad[j] += dy.at(i, j);
    ArrayD dx({n, in_});
    as_matrix(dx, n, in_).noalias() =
        as_matrix(dy, n, out_) * as_matrix(weight.value, out_, in_);
    return dx;
}

// ------------------------------------------------------------- LayerNorm

ArrayD LayerNorm::forward(const ArrayD& x, Cache* cache) const {
    check_2d(x, "LayerNorm");
    const std::size_t n = x.dim(0), d = x.dim(1);
    if (d != dim_) throw DataError("LayerNorm: dim mismatch");
    ArrayD y({n, d});
    ArrayD xhat({n, d});
    std::vector<double> inv_std(n);
    for (std::size_t i = 0; i < n; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < d; ++j) mu += x.at(i, j);
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = x.at(i, j) - mu;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[i] = is;
        for (std::size_t j = 0; j < d; ++j) {
            const double xh = (x.at(i, j) - mu) * is;
            xhat.at(i, j) = xh;
            y.at(i, j) = gamma.value[j] * xh + beta.value[j];
        }
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

ArrayD LayerNorm::backward(const Cache& cache, const ArrayD& dy) {
    const std::size_t n = dy.dim(0), d = dy.dim(1);
    ArrayD dx({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        double mean_g = 0.0, mean_gx = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double g = dy.at(i, j) * gamma.value[j];
            mean_g += g;
            mean_gx += g * cache.xhat.at(i, j);
            gamma.grad[j] += dy.at(i, j) * cache.xhat.at(i, j);
            beta.grad[j] += dy.at(i, j);
        }
        mean_g /= static_cast<double>(d);
        mean_gx /= static_cast<double>(d);
        for (std::size_t j = 0; j < d; ++j) {
            const double g = dy.at(i, j) * gamma.value[j];
            dx.at(i, j) = cache.inv_std[i] * (g - mean_g - cache.xhat.at(i, j) * mean_gx);
        }
    }
    return dx;
}

// ------------------------------------------------------------------ GELU

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}

ArrayD Gelu::forward(const ArrayD& x, Cache* cache) {
    ArrayD y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i];
        y[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
    }
    if (cache) cache->input = x;
    return y;
}

ArrayD Gelu::backward(const Cache& cache, const ArrayD& dy) {
    ArrayD dx(dy.shape);
    for (std::size_t i = 0; i < dy.size(); ++i) {
        const double v = cache.input[i];
        const double phi = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        dx[i] = dy[i] * (phi + v * pdf);
    }
    return dx;
}

// -------------------------------------------------------------- Attention

ArrayD MultiHeadSelfAttention::forward(const ArrayD& x, Cache* cache) const {
    check_2d(x, "MHSA");
    const std::size_t n = x.dim(0);
    const std::size_t dh = dim_ / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Cache local;
    Cache& c = cache ? *cache : local;
    c.q = wq.forward(x, cache ? &c.qc : nullptr);
    c.k = wk.forward(x, cache ? &c.kc : nullptr);
    c.v = wv.forward(x, cache ? &c.vc : nullptr);
    c.attn = ArrayD({heads, n, n});
    c.concat = ArrayD({n, dim_});

    auto qm = as_matrix(c.q, n, dim_);
    auto km = as_matrix(c.k, n, dim_);
    auto vm = as_matrix(c.v, n, dim_);
    auto om = as_matrix(c.concat, n, dim_);

    MatRM scores(n, n);
    for (std::size_t h = 0; h < heads; ++h) {
        const auto off = static_cast<Eigen::Index>(h * dh);
        const auto w = static_cast<Eigen::Index>(dh);
        scores.noalias() = qm.middleCols(off, w) * km.middleCols(off, w).transpose();
        scores *= scale;
        // row-wise softmax, max-shifted
        for (std::size_t i = 0; i < n; ++i) {
            double mx = scores(i, 0);
            for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, scores(i, j));
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double e = std::exp(scores(i, j) - mx);
                c.attn.at(h, i, j) = e;
                sum += e;
            }
            const double inv = 1.0 / sum;
            for (std::size_t j = 0; j < n; ++j) c.attn.at(h, i, j) *= inv;
        }
        MapCM am(&c.attn.data[h * n * n], n, n);
        om.middleCols(off, w).noalias() = am * vm.middleCols(off, w);
    }
    return wo.forward(c.concat, cache ? &c.oc : nullptr);
}

ArrayD MultiHeadSelfAttention::backward(const Cache& c, const ArrayD& dy) {
    const std::size_t n = dy.dim(0);
    const std::size_t dh = dim_ / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    ArrayD dconcat = wo.backward(c.oc, dy);
    ArrayD dq({n, dim_}), dk({n, dim_}), dv({n, dim_});
    auto dqm = as_matrix(dq, n, dim_);
    auto dkm = as_matrix(dk, n, dim_);
    auto dvm = as_matrix(dv, n, dim_);
    auto dcm = as_matrix(dconcat, n, dim_);
    auto qm = as_matrix(c.q, n, dim_);
    auto km = as_matrix(c.k, n, dim_);
    auto vm = as_matrix(c.v, n, dim_);

    MatRM dA(n, n), dS(n, n);
    for (std::size_t h = 0; h < heads; ++h) {
        const auto off = static_cast<Eigen::Index>(h * dh);
        const auto w = static_cast<Eigen::Index>(dh);
        MapCM am(&c.attn.data[h * n * n], n, n);
        dA.noalias() = dcm.middleCols(off, w) * vm.middleCols(off, w).transpose();
        dvm.middleCols(off, w).noalias() = am.transpose() * dcm.middleCols(off, w);
        // softmax backward: dS = A .* (dA - rowsum(dA .* A))
        for (std::size_t i = 0; i < n; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += dA(i, j) * am(i, j);
            for (std::size_t j = 0; j < n; ++j)
                dS(i, j) = am(i, j) * (dA(i, j) - dot);
        }
        dS *= scale;
        dqm.middleCols(off, w).noalias() = dS * km.middleCols(off, w);
        dkm.middleCols(off, w).noalias() = dS.transpose() * qm.middleCols(off, w);
    }

    ArrayD dx = wq.backward(c.qc, dq);
    ArrayD dxk = wk.backward(c.kc, dk);
    ArrayD dxv = wv.backward(c.vc, dv);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dxk[i] + dxv[i];
    return dx;
}

// ------------------------------------------------------------------- MLP

ArrayD Mlp::forward(const ArrayD& x, Cache* cache) const {
    ArrayD h = fc1.forward(x, cache ? &cache->c1 : nullptr);
    ArrayD a = Gelu::forward(h, cache ? &cache->g : nullptr);
    return fc2.forward(a, cache ? &cache->c2 : nullptr);
}

ArrayD Mlp::backward(const Cache& cache, const ArrayD& dy) {
    ArrayD da = fc2.backward(cache.c2, dy);
    ArrayD dh = Gelu::backward(cache.g, da);
    return fc1.backward(cache.c1, dh);
}

// ----------------------------------------------------------- EncoderBlock

ArrayD EncoderBlock::forward(const ArrayD& x, Cache* cache) const {
    ArrayD u = attn.forward(x, cache ? &cache->ac : nullptr);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += x[i];
    ArrayD y = ln1.forward(u, cache ? &cache->l1 : nullptr);
    ArrayD v = mlp.forward(y, cache ? &cache->mc : nullptr);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += y[i];
    return ln2.forward(v, cache ? &cache->l2 : nullptr);
}

ArrayD EncoderBlock::backward(const Cache& cache, const ArrayD& dz) {
    ArrayD dv = ln2.backward(cache.l2, dz);
    ArrayD dy = mlp.backward(cache.mc, dv);
    for (std::size_t i = 0; i < dy.size(); ++i) dy[i] += dv[i];
    ArrayD du = ln1.backward(cache.l1, dy);
    ArrayD dx = attn.backward(cache.ac, du);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += du[i];
    return dx;
}

// ---------------------------------------------------------------- Conv2d

ArrayD Conv2d::forward(const ArrayD& x, Cache* cache) const {
    if (x.rank() != 3 || x.dim(0) != in_ch_)
        throw DataError("Conv2d: expected " + std::to_string(in_ch_) +
                        " x H x W input, got " + x.shape_str());
    const std::size_t h = x.dim(1), w = x.dim(2);
    const std::size_t kk = k_ * k_;
    const long pad = static_cast<long>(k_ / 2);

    ArrayD cols({h * w, in_ch_ * kk});
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            double* row = &cols.data[(i * w + j) * in_ch_ * kk];
            std::size_t col = 0;
            for (std::size_t ic = 0; ic < in_ch_; ++ic) {
                for (std::size_t di = 0; di < k_; ++di) {
                    const long ii = static_cast<long>(i) + static_cast<long>(di) - pad;
                    for (std::size_t dj = 0; dj < k_; ++dj, ++col) {
                        const long jj = static_cast<long>(j) + static_cast<long>(dj) - pad;
                        row[col] = (ii >= 0 && jj >= 0 && ii < static_cast<long>(h) &&
                                    jj < static_cast<long>(w))
                                       ? x.at(ic, static_cast<std::size_t>(ii),
                                              static_cast<std::size_t>(jj))
                                       : 0.0;
                    }
                }
            }
        }
    }

    ArrayD yflat = matmul_nt(cols, weight.value);  // (h*w) x out
    ArrayD y({out_ch_, h, w});
    for (std::size_t p = 0; p < h * w; ++p)
        for (std::size_t oc = 0; oc < out_ch_; ++oc)
            y.data[oc * h * w + p] = yflat.at(p, oc) + bias.value[oc];

    if (cache) {
        cache->cols = std::move(cols);
        cache->h = h;
        cache->w = w;
    }
    return y;
}

ArrayD Conv2d::backward(const Cache& cache, const ArrayD& dy) {
    const std::size_t h = cache.h, w = cache.w;
    const std::size_t kk = k_ * k_;
    const long pad = static_cast<long>(k_ / 2);

    ArrayD dyflat({h * w, out_ch_});
    for (std::size_t p = 0; p < h * w; ++p)
        for (std::size_t oc = 0; oc < out_ch_; ++oc) {
            const double g = dy.data[oc * h * w + p];
            dyflat.at(p, oc) = g;
            bias.grad[oc] += g;
        }

    as_matrix(weight.grad, out_ch_, in_ch_ * kk).noalias() +=
        as_matrix(dyflat, h * w, out_ch_).transpose() *
        as_matrix(cache.cols, h * w, in_ch_ * kk);

    ArrayD dcols = matmul(dyflat, weight.value);  // (h*w) x (in*k*k)

    ArrayD dx({in_ch_, h, w});
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            const double* row = &dcols.data[(i * w + j) * in_ch_ * kk];
            std::size_t col = 0;
            for (std::size_t ic = 0; ic < in_ch_; ++ic) {
                for (std::size_t di = 0; di < k_; ++di) {
                    const long ii = static_cast<long>(i) + static_cast<long>(di) - pad;
                    for (std::size_t dj = 0; dj < k_; ++dj, ++col) {
                        const long jj = static_cast<long>(j) + static_cast<long>(dj) - pad;
                        if (ii >= 0 && jj >= 0 && ii < static_cast<long>(h) &&
                            jj < static_cast<long>(w))
                            dx.at(ic, static_cast<std::size_t>(ii),
                                  static_cast<std::size_t>(jj)) += row[col];
                    }
                }
            }
        }
    }
    return dx;
}

// ---------------------------------------------------- BilinearUpsample2x

namespace {

struct Taps {
    std::vector<std::size_t> i0, i1;
    std::vector<double> w0, w1;
};

Taps upsample_taps(std::size_t in_n) {
    const std::size_t out_n = in_n * 2;
    Taps t;
    t.i0.resize(out_n);
    t.i1.resize(out_n);
    t.w0.resize(out_n);
    t.w1.resize(out_n);
    for (std::size_t i = 0; i < out_n; ++i) {
        const double src = (static_cast<double>(i) + 0.5) * 0.5 - 0.5;
        double f = std::floor(src);
        const double frac = src - f;
        long lo = static_cast<long>(f);
        long hi = lo + 1;
        lo = std::max(0L, std::min(lo, static_cast<long>(in_n) - 1));
        hi = std::max(0L, std::min(hi, static_cast<long>(in_n) - 1));
        t.i0[i] = static_cast<std::size_t>(lo);
        t.i1[i] = static_cast<std::size_t>(hi);
        t.w0[i] = 1.0 - frac;
        t.w1[i] = frac;
    }
    return t;
}

}  // namespace

ArrayD BilinearUpsample2x::forward(const ArrayD& x, Cache* cache) {
    if (x.rank() != 3) throw DataError("BilinearUpsample2x: expected C x H x W");
    const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const Taps ty = upsample_taps(h), tx = upsample_taps(w);
    ArrayD y({c, 2 * h, 2 * w});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < 2 * h; ++i)
            for (std::size_t j = 0; j < 2 * w; ++j)
                y.at(ch, i, j) =
                    ty.w0[i] * (tx.w0[j] * x.at(ch, ty.i0[i], tx.i0[j]) +
                                tx.w1[j] * x.at(ch, ty.i0[i], tx.i1[j])) +
                    ty.w1[i] * (tx.w0[j] * x.at(ch, ty.i1[i], tx.i0[j]) +
                                tx.w1[j] * x.at(ch, ty.i1[i], tx.i1[j]));
    if (cache) {
        cache->h = h;
        cache->w = w;
    }
    return y;
}

ArrayD BilinearUpsample2x::backward(const Cache& cache, const ArrayD& dy) {
    const std::size_t c = dy.dim(0), h = cache.h, w = cache.w;
    const Taps ty = upsample_taps(h), tx = upsample_taps(w);
    ArrayD dx({c, h, w});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < 2 * h; ++i)
            for (std::size_t j = 0; j < 2 * w; ++j) {
                const double g = dy.at(ch, i, j);
                dx.at(ch, ty.i0[i], tx.i0[j]) += ty.w0[i] * tx.w0[j] * g;
                dx.at(ch, ty.i0[i], tx.i1[j]) += ty.w0[i] * tx.w1[j] * g;
                dx.at(ch, ty.i1[i], tx.i0[j]) += ty.w1[i] * tx.w0[j] * g;
                dx.at(ch, ty.i1[i], tx.i1[j]) += ty.w1[i] * tx.w1[j] * g;
            }
    return dx;
}

// ------------------------------------------------------------ ChannelNorm

ArrayD ChannelNorm::forward(const ArrayD& x, Cache* cache) const {
    if (x.rank() != 3) throw DataError("ChannelNorm: expected C x H x W");
    const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    ArrayD rows({h * w, c});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < h * w; ++p)
            rows.at(p, ch) = x.data[ch * h * w + p];
    ArrayD normed = ln.forward(rows, cache ? &cache->lc : nullptr);
    ArrayD y({c, h, w});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < h * w; ++p)
            y.data[ch * h * w + p] = normed.at(p, ch);
    if (cache) {
        cache->h = h;
        cache->w = w;
    }
    return y;
}

ArrayD ChannelNorm::backward(const Cache& cache, const ArrayD& dy) {
    const std::size_t c = dy.dim(0), h = cache.h, w = cache.w;
    ArrayD drows({h * w, c});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < h * w; ++p)
            drows.at(p, ch) = dy.data[ch * h * w + p];
    ArrayD dnorm = ln.backward(cache.lc, drows);
    ArrayD dx({c, h, w});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < h * w; ++p)
            dx.data[ch * h * w + p] = dnorm.at(p, ch);
    return dx;
}

}  // namespace hyperaod::nn
