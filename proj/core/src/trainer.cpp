#include "hyperaod/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "hyperaod/datapipe.hpp"

namespace hyperaod {

double masked_mse(const ArrayD& pred, const ArrayD& target, const MaskGrid& mask) {
    if (!pred.same_shape(target) || pred.size() != mask.size())
        throw DataError("masked_mse: shape mismatch");
    double sse = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!mask[i]) continue;
        const double d = pred[i] - target[i];
        sse += d * d;
        ++n;
    }
    if (n == 0) throw DataError("masked_mse: no valid pixels");
    return sse / static_cast<double>(n);
}

LossGrad masked_sse_grad(const ArrayD& pred, const ArrayD& target, const MaskGrid& mask) {
    if (!pred.same_shape(target) || pred.size() != mask.size())
        throw DataError("masked_sse_grad: shape mismatch");
    LossGrad out;
    out.d_pred = ArrayD(pred.shape);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!mask[i]) continue;
        const double d = pred[i] - target[i];
        out.sse += d * d;
        out.d_pred[i] = 2.0 * d;
        ++out.n_valid;
    }
    return out;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
    if (micro_batch == 0 || effective_batch == 0)
        throw ConfigError("train: batch sizes must be positive");
    if (effective_batch % micro_batch != 0)
        throw ConfigError("train: effective_batch " + std::to_string(effective_batch) +
                          " not divisible by micro_batch " + std::to_string(micro_batch));
    if (max_epochs == 0) throw ConfigError("train: max_epochs must be positive");
}

AdamW::AdamW(nn::ParamRegistry& params, const TrainConfig& cfg) : params_(params), cfg_(cfg) {
    for (const auto* p : params_.items()) {
        m_.emplace_back(p->value.shape);
        v_.emplace_back(p->value.shape);
    }
}

void AdamW::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.items().size(); ++k) {
        auto& p = *params_.items()[k];
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = p.grad[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.value[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                                cfg_.weight_decay * p.value[i]);
        }
    }
}

bool early_stop_update(EarlyStopState& state, double val_mse, std::size_t patience) {
    if (!std::isfinite(val_mse)) throw NumericError("early stopping saw non-finite validation MSE");
    ++state.epochs_seen;
    if (val_mse < state.best_val) {
        state.best_val = val_mse;
        state.best_epoch = state.epochs_seen;
        state.epochs_since_improve = 0;
    } else {
        ++state.epochs_since_improve;
    }
    return state.epochs_since_improve >= patience;
}

namespace {

ArrayD standardized_input(const PatchSample& s, const BandStats& stats) {
    return to_f64(standardize(s.radiance, stats).values);
}

double eval_masked_mse(const Regressor& model, const std::vector<const PatchSample*>& samples,
                       const BandStats& stats) {
    double sse = 0.0;
    std::size_t n = 0;
    for (const auto* s : samples) {
        const ArrayD pred = model.forward(standardized_input(*s, stats));
        const ArrayD target = to_f64(s->aod.values);
        for (std::size_t i = 0; i < pred.size(); ++i) {
            if (!s->aod.valid[i]) continue;
            const double d = pred[i] - target[i];
            sse += d * d;
            ++n;
        }
    }
    if (n == 0) throw DataError("validation split has no valid pixels");
    return sse / static_cast<double>(n);
}

}  // namespace

TrainResult train(Regressor& model, const PatchPack& pack, const TrainConfig& cfg) {
    cfg.validate();
    const auto train_samples = pack.of_split(Split::train);
    const auto val_samples = pack.of_split(Split::val);
    if (train_samples.empty()) throw DataError("train: pack has no training samples");

    const BandStats stats = pack.band_stats ? *pack.band_stats : compute_band_stats(pack);
    AdamW opt(model.params(), cfg);
    EarlyStopState stop_state;
    TrainResult result;
    std::vector<ArrayD> best_params = model.params().snapshot();

    const std::size_t accum = cfg.effective_batch / cfg.micro_batch;
    std::vector<std::size_t> order(train_samples.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng shuffle_rng(cfg.seed + 0x9e3779b97f4a7c15ULL * epoch);
        shuffle_rng.shuffle(order);

        double lr = cfg.learning_rate;
        if (cfg.scheduler == TrainConfig::Scheduler::cosine)
            lr = cfg.learning_rate * 0.5 *
                 (1.0 + std::cos(M_PI * static_cast<double>(epoch - 1) /
                                 static_cast<double>(cfg.max_epochs)));

        double epoch_sse = 0.0;
        std::size_t epoch_n = 0;
        std::size_t cursor = 0;
        while (cursor < order.size()) {
            model.params().zero_grad();
            double group_sse = 0.0;
            std::size_t group_n = 0;
            for (std::size_t mb = 0; mb < accum && cursor < order.size(); ++mb) {
                for (std::size_t k = 0; k < cfg.micro_batch && cursor < order.size();
                     ++k, ++cursor) {
                    const PatchSample& s = *train_samples[order[cursor]];
                    auto trace = model.make_trace();
                    const ArrayD pred = model.forward(standardized_input(s, stats), trace.get());
                    LossGrad lg = masked_sse_grad(pred, to_f64(s.aod.values), s.aod.valid);
                    model.backward(*trace, lg.d_pred);
                    group_sse += lg.sse;
                    group_n += lg.n_valid;
                }
            }
            if (group_n == 0) throw DataError("train: zero valid pixels in batch");
            if (!std::isfinite(group_sse))
                throw NumericError("train: loss diverged (non-finite) at epoch " +
                                   std::to_string(epoch));
            // grads hold d(sum of squared errors); normalize to the
            // pixel-weighted batch mean so accumulation matches a full batch
            const double inv_n = 1.0 / static_cast<double>(group_n);
            for (auto* p : model.params().items())
                for (auto& g : p->grad.data) g *= inv_n;
            opt.step(lr);
            epoch_sse += group_sse;
            epoch_n += group_n;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_mse = epoch_sse / static_cast<double>(epoch_n);
        rec.lr = lr;
        if (!std::isfinite(rec.train_mse))
            throw NumericError("train: loss diverged at epoch " + std::to_string(epoch));

        // early stopping on validation MSE; falls back to the training MSE
        // when the pack carries no validation split (overfit experiments)
        rec.val_mse = val_samples.empty() ? rec.train_mse
                                          : eval_masked_mse(model, val_samples, stats);
        const double prev_best = stop_state.best_val;
        rec.stopped = early_stop_update(stop_state, rec.val_mse, cfg.patience);
        if (cfg.target_train_mse > 0.0 && rec.train_mse <= cfg.target_train_mse)
            rec.stopped = true;
        if (rec.val_mse < prev_best) best_params = model.params().snapshot();
        result.history.push_back(rec);
        if (rec.stopped) break;
    }

    model.params().restore(best_params);
    result.best_epoch = stop_state.best_epoch;
    result.best_val = stop_state.best_val;
    result.optimizer_steps = opt.steps_taken();
    return result;
}

void write_history_jsonl(const std::string& path, const std::vector<EpochRecord>& history) {
    std::ofstream os(path);
    if (!os) throw DataError("write_history_jsonl: cannot open '" + path + "'");
    for (const auto& r : history) {
        nlohmann::json j{{"epoch", r.epoch},
                         {"train_mse", r.train_mse},
                         {"val_mse", r.val_mse},
                         {"lr", r.lr},
                         {"stopped", r.stopped}};
        os << j.dump() << "\n";
    }
}

// ------------------------------------------------------------ grad check

void gradcheck_init(Regressor& model, std::uint64_t seed) {
    Rng rng(seed);
    for (auto* p : model.params().items()) {
        const std::string& n = p->name;
        if (n.find(".gamma") != std::string::npos) {
            for (auto& v : p->value.data) v = rng.uniform(0.8, 1.2);
        } else if (n.find(".beta") != std::string::npos ||
                   n.find(".bias") != std::string::npos) {
            for (auto& v : p->value.data) v = 0.1 * rng.normal();
        } else {
            const double fan = p->value.rank() >= 2
                                   ? static_cast<double>(p->value.shape.back())
                                   : static_cast<double>(p->value.size());
            const double s = 1.0 / std::sqrt(fan);
            for (auto& v : p->value.data) v = s * rng.normal();
        }
    }
}

std::vector<ArrayD> analytic_gradients(Regressor& model, const ArrayD& x, const ArrayD& target,
                                       const MaskGrid& mask) {
    model.params().zero_grad();
    auto trace = model.make_trace();
    const ArrayD pred = model.forward(x, trace.get());
    LossGrad lg = masked_sse_grad(pred, target, mask);
    if (lg.n_valid == 0) throw DataError("grad check: no valid pixels");
    const double inv_n = 1.0 / static_cast<double>(lg.n_valid);
    for (auto& g : lg.d_pred.data) g *= inv_n;
    model.backward(*trace, lg.d_pred);
    std::vector<ArrayD> out;
    for (const auto* p : model.params().items()) out.push_back(p->grad);
    return out;
}

std::vector<ArrayD> numeric_gradients(Regressor& model, const ArrayD& x, const ArrayD& target,
                                      const MaskGrid& mask, double h) {
    std::vector<ArrayD> out;
    for (auto* p : model.params().items()) {
        ArrayD g(p->value.shape);
        for (std::size_t i = 0; i < p->size(); ++i) {
            const double orig = p->value[i];
            p->value[i] = orig + h;
            const double fp = masked_mse(model.forward(x), target, mask);
            p->value[i] = orig - h;
            const double fm = masked_mse(model.forward(x), target, mask);
            p->value[i] = orig;
            g[i] = (fp - fm) / (2.0 * h);
        }
        out.push_back(std::move(g));
    }
    return out;
}

GradCheckReport compare_gradients(const nn::ParamRegistry& params,
                                  const std::vector<ArrayD>& analytic,
                                  const std::vector<ArrayD>& numeric, double tolerance) {
    if (analytic.size() != params.items().size() || numeric.size() != params.items().size())
        throw DataError("compare_gradients: gradient list size mismatch");
    GradCheckReport rep;
    rep.tolerance = tolerance;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
        for (std::size_t i = 0; i < analytic[k].size(); ++i) {
            const double a = analytic[k][i], n = numeric[k][i];
            const double denom = std::max(1e-8, std::max(std::abs(a), std::abs(n)));
            const double rel = std::abs(a - n) / denom;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_param = params.items()[k]->name;
                rep.worst_index = i;
            }
        }
    }
    rep.pass = rep.max_rel_err <= tolerance;
    return rep;
}

GradCheckReport grad_check(Regressor& model, const ArrayD& x, const ArrayD& target,
                           const MaskGrid& mask, double h, double tolerance) {
    const auto analytic = analytic_gradients(model, x, target, mask);
    const auto numeric = numeric_gradients(model, x, target, mask, h);
    return compare_gradients(model.params(), analytic, numeric, tolerance);
}

}  // namespace hyperaod
