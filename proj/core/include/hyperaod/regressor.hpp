#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "hyperaod/array.hpp"
#include "hyperaod/nn/param.hpp"
#include "hyperaod/types.hpp"

namespace hyperaod {

// Common surface for trainable radiance -> AOD regressors (ViTCG and the
// pixel-wise DNN baselines). forward() is const; activation state lives in a
// caller-owned Trace so frozen models can be shared read-only across
// threads. backward() accumulates into parameter gradients and belongs to a
// single training stream.
class Regressor {
public:
    class Trace {
    public:
        virtual ~Trace() = default;
    };

    virtual ~Regressor() = default;

    virtual std::unique_ptr<Trace> make_trace() const = 0;

    // x: C x H x W standardized radiance -> H x W prediction
    virtual ArrayD forward(const ArrayD& x, Trace* trace = nullptr) const = 0;

    // d_out: H x W loss gradient w.r.t. the prediction
    virtual void backward(Trace& trace, const ArrayD& d_out) = 0;

    virtual nn::ParamRegistry& params() = 0;
    virtual const nn::ParamRegistry& params() const = 0;

    virtual std::string kind() const = 0;
    virtual nlohmann::json config_json() const = 0;
    virtual std::size_t input_channels() const = 0;

    // Convenience evaluation path: expects a standardized patch, copies the
    // validity mask through.
    AODField predict(const RadiancePatch& patch) const;
};

}  // namespace hyperaod
