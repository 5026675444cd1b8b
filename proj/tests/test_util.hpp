#pragma once

#include <cmath>
#include <functional>

#include "hyperaod/array.hpp"
#include "hyperaod/common.hpp"
#include "hyperaod/types.hpp"

namespace testutil {

using hyperaod::ArrayD;
using hyperaod::ArrayF;
using hyperaod::MaskGrid;

inline void fill_normal(ArrayD& a, hyperaod::Rng& rng, double scale = 1.0) {
    for (auto& v : a.data) v = rng.normal() * scale;
}

inline void fill_normal(ArrayF& a, hyperaod::Rng& rng, double scale = 1.0) {
    for (auto& v : a.data) v = static_cast<float>(rng.normal() * scale);
}

inline double dot(const ArrayD& a, const ArrayD& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double rel_err(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max(floor, std::max(std::abs(a), std::abs(b)));
}

// max elementwise relative error between an analytic gradient and central
// finite differences of `loss` w.r.t. the entries of `x`
inline double fd_check(ArrayD& x, const ArrayD& analytic,
                       const std::function<double()>& loss, double h = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double fp = loss();
        x[i] = orig - h;
        const double fm = loss();
        x[i] = orig;
        const double num = (fp - fm) / (2.0 * h);
        worst = std::max(worst, rel_err(analytic[i], num));
    }
    return worst;
}

inline hyperaod::RadiancePatch make_patch(std::size_t c, std::size_t h, std::size_t w,
                                          hyperaod::Rng& rng) {
    hyperaod::RadiancePatch p;
    p.values = ArrayF({c, h, w});
    fill_normal(p.values, rng);
    p.valid = MaskGrid({h, w}, 1);
    p.wavelengths.resize(c);
    for (std::size_t i = 0; i < c; ++i) p.wavelengths[i] = 400.0 + 2.0 * static_cast<double>(i);
    return p;
}

}  // namespace testutil
