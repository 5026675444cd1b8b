#include "hyperaod/nn/param.hpp"

#include <cmath>

namespace hyperaod::nn {

void init_trunc_normal(Parameter& p, Rng& rng, double stddev) {
    for (auto& v : p.value.data) {
        double x = rng.normal();
        while (std::abs(x) > 2.0) x = rng.normal();
        v = x * stddev;
    }
}

void init_he_normal(Parameter& p, Rng& rng, std::size_t fan_in) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : p.value.data) v = rng.normal() * stddev;
}

void init_zeros(Parameter& p) { p.value.fill(0.0); }

void init_ones(Parameter& p) { p.value.fill(1.0); }

}  // namespace hyperaod::nn
