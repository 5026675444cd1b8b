#include "hyperaod/regressor.hpp"

namespace hyperaod {

AODField Regressor::predict(const RadiancePatch& patch) const {
    ArrayD pred = forward(to_f64(patch.values));
    AODField out;
    out.values = to_f32(pred);
    out.valid = patch.valid;
    return out;
}

}  // namespace hyperaod
