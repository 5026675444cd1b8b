#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "hyperaod/array.hpp"
#include "hyperaod/regressor.hpp"
#include "hyperaod/types.hpp"

namespace hyperaod {

// Valid-pixel mean of (pred - target)^2. Throws DataError when the mask has
// no valid pixel.
double masked_mse(const ArrayD& pred, const ArrayD& target, const MaskGrid& mask);

// Unnormalized sum of squared errors plus its gradient w.r.t. pred
// (d sse / d pred = 2 (pred - target) at valid pixels, exactly zero at
// masked ones). Callers divide by the pooled valid count to obtain the
// batch loss gradient.
struct LossGrad {
    double sse = 0.0;
    std::size_t n_valid = 0;
    ArrayD d_pred;
};
LossGrad masked_sse_grad(const ArrayD& pred, const ArrayD& target, const MaskGrid& mask);

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t effective_batch = 256;
    std::size_t micro_batch = 8;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    std::size_t patience = 50;
    std::size_t max_epochs = 100;
    std::uint64_t seed = 0;
    enum class Scheduler { none, cosine };
    Scheduler scheduler = Scheduler::none;
    double target_train_mse = 0.0;  // > 0: stop once the epoch loss reaches it

    void validate() const;  // throws ConfigError
};

// Decoupled-weight-decay Adam over a parameter registry.
class AdamW {
public:
    AdamW(nn::ParamRegistry& params, const TrainConfig& cfg);
    void step(double lr);  // consumes Parameter::grad
    std::size_t steps_taken() const { return t_; }

private:
    nn::ParamRegistry& params_;
    TrainConfig cfg_;
    std::vector<ArrayD> m_, v_;
    std::size_t t_ = 0;
};

struct EarlyStopState {
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t epochs_since_improve = 0;
    std::size_t epochs_seen = 0;
};

// Strict improvement resets the counter; equality counts as no improvement;
// stop fires when epochs_since_improve >= patience.
bool early_stop_update(EarlyStopState& state, double val_mse, std::size_t patience);

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_mse = 0.0;
    double val_mse = 0.0;
    double lr = 0.0;
    bool stopped = false;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val = 0.0;
    std::size_t optimizer_steps = 0;
};

// AdamW with gradient accumulation to the effective batch, per-epoch
// validation, early stopping on validation MSE, and divergence guard. On
// return the model holds the best-epoch parameters. Fully seeded: identical
// (config, data, seed) reproduces the history.
TrainResult train(Regressor& model, const PatchPack& pack, const TrainConfig& cfg);

void write_history_jsonl(const std::string& path, const std::vector<EpochRecord>& history);

// ---------------------------------------------------------- grad checking

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double tolerance = 0.0;
    bool pass = false;
};

// Re-draws all parameters at a generic operating point (Xavier-scale
// weights, O(0.1) biases, gamma near 1) so every nonlinearity is
// well-conditioned for finite differencing; trained networks live in this
// regime, while the tiny 0.02-scale fresh init parks the normalization
// layers in an epsilon-dominated corner whose curvature defeats h=1e-5
// central differences.
void gradcheck_init(Regressor& model, std::uint64_t seed);

// Analytic d masked_mse / d theta for every parameter, via one
// forward/backward pass.
std::vector<ArrayD> analytic_gradients(Regressor& model, const ArrayD& x, const ArrayD& target,
                                       const MaskGrid& mask);

// Central finite differences, O(P) forward evaluations at 64-bit precision.
std::vector<ArrayD> numeric_gradients(Regressor& model, const ArrayD& x, const ArrayD& target,
                                      const MaskGrid& mask, double h = 1e-5);

// Elementwise relative error with the denominator floored at 1e-8.
GradCheckReport compare_gradients(const nn::ParamRegistry& params,
                                  const std::vector<ArrayD>& analytic,
                                  const std::vector<ArrayD>& numeric, double tolerance);

GradCheckReport grad_check(Regressor& model, const ArrayD& x, const ArrayD& target,
                           const MaskGrid& mask, double h = 1e-5, double tolerance = 1e-3);

}  // namespace hyperaod
