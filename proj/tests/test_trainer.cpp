#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hyperaod/baselines.hpp"
#include "hyperaod/datapipe.hpp"
#include "hyperaod/model.hpp"
#include "hyperaod/trainer.hpp"
#include "test_util.hpp"

using namespace hyperaod;
using testutil::fill_normal;

namespace {

ViTCGConfig micro_config() {
    ViTCGConfig cfg;
    cfg.channels = 4;
    cfg.groups = 2;
    cfg.spatial = 8;
    cfg.patch = 8;
    cfg.token_dim = 8;
    cfg.depth = 1;
    cfg.heads = 2;
    cfg.decoder_channels = {4, 2, 2, 2};
    return cfg;
}

BandStats identity_stats(std::size_t c) {
    BandStats s;
    s.mean.assign(c, 0.0);
    s.stddev.assign(c, 1.0);
    return s;
}

PatchSample random_sample(std::size_t c, std::size_t hw, Rng& rng, Split split,
                          const std::string& granule) {
    PatchSample s;
    s.radiance = testutil::make_patch(c, hw, hw, rng);
    s.aod.values = ArrayF({hw, hw});
    fill_normal(s.aod.values, rng, 0.3);
    for (auto& v : s.aod.values.data) v = std::abs(v);
    s.aod.valid = s.radiance.valid;
    s.split = split;
    s.granule_id = granule;
    return s;
}

PatchPack random_pack(std::size_t c, std::size_t hw, std::size_t n_train, std::size_t n_val,
                      std::uint64_t seed) {
    Rng rng(seed);
    PatchPack pack;
    for (std::size_t i = 0; i < n_train; ++i)
        pack.samples.push_back(random_sample(c, hw, rng, Split::train, "train_g"));
    for (std::size_t i = 0; i < n_val; ++i)
        pack.samples.push_back(random_sample(c, hw, rng, Split::val, "val_g"));
    pack.band_stats = identity_stats(c);
    return pack;
}

}  // namespace

TEST_CASE("masked_mse: hand cases") {
    ArrayD pred({1, 2}), target({1, 2});
    MaskGrid mask({1, 2}, 1);

    pred.data = {2.0, 4.0};
    target.data = {1.0, 2.0};
    CHECK(masked_mse(pred, target, mask) == doctest::Approx(2.5).epsilon(1e-15));

    pred = target;
    CHECK(masked_mse(pred, target, mask) == 0.0);

    pred.data = {2.0, 999.0};
    target.data = {1.0, 0.0};
    mask.data = {1, 0};
    CHECK(masked_mse(pred, target, mask) == doctest::Approx(1.0).epsilon(1e-15));

    // perturbing the masked entry changes nothing
    pred.data[1] = -12345.0;
    target.data[1] = 777.0;
    CHECK(masked_mse(pred, target, mask) == doctest::Approx(1.0).epsilon(1e-15));

    mask.data = {0, 0};
    CHECK_THROWS_AS(masked_mse(pred, target, mask), DataError);
}

TEST_CASE("masked_mse: all-valid mask equals the plain mean squared error") {
    Rng rng(3);
    ArrayD pred({6, 7}), target({6, 7});
    fill_normal(pred, rng);
    fill_normal(target, rng);
    MaskGrid mask({6, 7}, 1);
    double plain = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        plain += (pred[i] - target[i]) * (pred[i] - target[i]);
    plain /= static_cast<double>(pred.size());
    CHECK(std::abs(masked_mse(pred, target, mask) - plain) < 1e-12);
}

TEST_CASE("masked_sse_grad: zero gradient at masked positions") {
    Rng rng(5);
    ArrayD pred({4, 4}), target({4, 4});
    fill_normal(pred, rng);
    fill_normal(target, rng);
    MaskGrid mask({4, 4}, 1);
    mask.at(1, 2) = 0;
    mask.at(3, 0) = 0;
    const LossGrad lg = masked_sse_grad(pred, target, mask);
    CHECK(lg.n_valid == 14);
    CHECK(lg.d_pred.at(1, 2) == 0.0);
    CHECK(lg.d_pred.at(3, 0) == 0.0);
    CHECK(lg.d_pred.at(0, 0) ==
          doctest::Approx(2.0 * (pred.at(0, 0) - target.at(0, 0))).epsilon(1e-15));
}

TEST_CASE("mask invariance: target values under the mask never reach the gradients") {
    ViTCG model(micro_config(), 21);
    Rng rng(22);
    ArrayD x({4, 8, 8});
    fill_normal(x, rng);
    ArrayD target({8, 8});
    fill_normal(target, rng);
    MaskGrid mask({8, 8}, 1);
    for (std::size_t k = 0; k < 12; ++k) mask[rng.index(64)] = 0;

    const auto g1 = analytic_gradients(model, x, target, mask);
    const double l1 = masked_mse(model.forward(x), target, mask);

    ArrayD poisoned = target;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (!mask[i]) poisoned[i] = 1e9 * rng.normal();
    const auto g2 = analytic_gradients(model, x, poisoned, mask);
    const double l2 = masked_mse(model.forward(x), poisoned, mask);

    CHECK(std::abs(l1 - l2) <= 1e-12);
    for (std::size_t k = 0; k < g1.size(); ++k)
        for (std::size_t i = 0; i < g1[k].size(); ++i)
            CHECK(std::abs(g1[k][i] - g2[k][i]) <= 1e-10);
}

TEST_CASE("gradient check: tiny ViTCG analytic vs central differences") {
    ViTCG model(micro_config(), 31);
    gradcheck_init(model, 7);
    Rng rng(32);
    ArrayD x({4, 8, 8});
    fill_normal(x, rng);
    MaskGrid mask({8, 8}, 1);
    mask.at(2, 2) = 0;
    ArrayD target = model.forward(x);
    for (auto& v : target.data) v += 0.05 * rng.normal();

    const GradCheckReport rep = grad_check(model, x, target, mask);
    INFO("worst ", rep.worst_param, "[", rep.worst_index, "] rel err ", rep.max_rel_err);
    CHECK(rep.pass);
    CHECK(rep.max_rel_err <= 1e-3);
}

TEST_CASE("gradient check: tiny pixel DNN, and a seeded fault is caught") {
    PixelDNNConfig cfg;
    cfg.input_bands = 4;
    cfg.hidden_sizes = {8, 6};
    PixelDnn model(cfg, 41);
    gradcheck_init(model, 8);
    Rng rng(42);
    ArrayD x({4, 8, 8});
    fill_normal(x, rng);
    ArrayD target({8, 8});
    fill_normal(target, rng, 0.4);
    MaskGrid mask({8, 8}, 1);

    const auto analytic = analytic_gradients(model, x, target, mask);
    const auto numeric = numeric_gradients(model, x, target, mask);
    const GradCheckReport ok = compare_gradients(model.params(), analytic, numeric, 1e-3);
    CHECK(ok.pass);

    // corrupt one gradient entry (doubled weight gradient) -> detected
    auto corrupted = analytic;
    corrupted[0][3] *= 2.0;
    const GradCheckReport bad = compare_gradients(model.params(), corrupted, numeric, 1e-3);
    CHECK(!bad.pass);
    CHECK(bad.worst_param == model.params().items()[0]->name);
}

TEST_CASE("early stopping: the patience-2 trace from the contract") {
    EarlyStopState st;
    CHECK(!early_stop_update(st, 0.5, 2));
    CHECK(!early_stop_update(st, 0.4, 2));
    CHECK(!early_stop_update(st, 0.41, 2));
    CHECK(early_stop_update(st, 0.42, 2));  // stop after the 4th value
    CHECK(st.best_epoch == 2);
    CHECK(st.best_val == doctest::Approx(0.4));

    // monotone decreasing never stops
    EarlyStopState down;
    for (int i = 0; i < 200; ++i) CHECK(!early_stop_update(down, 1.0 / (i + 1), 2));

    // equality is no improvement
    EarlyStopState tie;
    CHECK(!early_stop_update(tie, 0.5, 1));
    CHECK(early_stop_update(tie, 0.5, 1));
    CHECK(tie.best_epoch == 1);
}

TEST_CASE("training config validation") {
    TrainConfig cfg;
    cfg.effective_batch = 10;
    cfg.micro_batch = 4;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.micro_batch = 5;
    CHECK_NOTHROW(cfg.validate());
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("gradient accumulation: micro-batched update equals the full batch") {
    PatchPack pack = random_pack(4, 8, 8, 0, 7);

    TrainConfig full;
    full.learning_rate = 1e-3;
    full.effective_batch = 8;
    full.micro_batch = 8;
    full.max_epochs = 1;
    full.seed = 5;

    TrainConfig micro = full;
    micro.micro_batch = 2;  // 4 accumulation steps

    ViTCG a(micro_config(), 77);
    ViTCG b(micro_config(), 77);
    train(a, pack, full);
    train(b, pack, micro);

    const auto& pa = a.params().items();
    const auto& pb = b.params().items();
    for (std::size_t k = 0; k < pa.size(); ++k)
        for (std::size_t i = 0; i < pa[k]->size(); ++i)
            CHECK(std::abs(pa[k]->value[i] - pb[k]->value[i]) < 1e-6);
}

TEST_CASE("training: seeded determinism and best-checkpoint restoration") {
    PatchPack pack = random_pack(4, 8, 6, 3, 11);

    TrainConfig cfg;
    cfg.learning_rate = 3e-3;
    cfg.effective_batch = 6;
    cfg.micro_batch = 3;
    cfg.max_epochs = 12;
    cfg.patience = 50;
    cfg.seed = 19;

    ViTCG m1(micro_config(), 3);
    ViTCG m2(micro_config(), 3);
    const TrainResult r1 = train(m1, pack, cfg);
    const TrainResult r2 = train(m2, pack, cfg);

    REQUIRE(r1.history.size() == r2.history.size());
    for (std::size_t i = 0; i < r1.history.size(); ++i) {
        CHECK(r1.history[i].train_mse == r2.history[i].train_mse);
        CHECK(r1.history[i].val_mse == r2.history[i].val_mse);
    }

    // best_val is the minimum of the recorded validation losses, and the
    // returned parameters reproduce it
    double min_val = r1.history.front().val_mse;
    for (const auto& rec : r1.history) min_val = std::min(min_val, rec.val_mse);
    CHECK(r1.best_val == doctest::Approx(min_val).epsilon(1e-15));

    MaskGrid dummy;
    double sse = 0.0;
    std::size_t n = 0;
    for (const auto* s : pack.of_split(Split::val)) {
        const ArrayD pred = m1.forward(to_f64(standardize(s->radiance, *pack.band_stats).values));
        for (std::size_t i = 0; i < pred.size(); ++i) {
            if (!s->aod.valid[i]) continue;
            const double d = pred[i] - static_cast<double>(s->aod.values[i]);
            sse += d * d;
            ++n;
        }
    }
    CHECK(sse / static_cast<double>(n) == doctest::Approx(r1.best_val).epsilon(1e-12));
}

TEST_CASE("training: early stop fires within the epoch budget") {
    PatchPack pack = random_pack(4, 8, 6, 3, 13);
    TrainConfig cfg;
    cfg.learning_rate = 5e-2;  // aggressive on random targets: val soon worsens
    cfg.effective_batch = 6;
    cfg.micro_batch = 6;
    cfg.max_epochs = 400;
    cfg.patience = 5;
    cfg.seed = 23;

    ViTCG model(micro_config(), 9);
    const TrainResult r = train(model, pack, cfg);
    CHECK(r.history.size() < 400);
    CHECK(r.history.back().stopped);
    CHECK(r.best_epoch <= r.history.size() - cfg.patience);
}

TEST_CASE("training: divergence aborts with a numeric failure") {
    PatchPack pack = random_pack(4, 8, 4, 0, 17);
    TrainConfig cfg;
    cfg.learning_rate = 1e12;
    cfg.effective_batch = 4;
    cfg.micro_batch = 4;
    cfg.max_epochs = 40;
    cfg.seed = 3;

    PixelDNNConfig dc;
    dc.input_bands = 4;
    dc.hidden_sizes = {8};
    PixelDnn model(dc, 29);
    CHECK_THROWS_AS(train(model, pack, cfg), NumericError);
}

TEST_CASE("history jsonl: one record per epoch") {
    const std::string path =
        (std::filesystem::temp_directory_path() / "hyperaod_history.jsonl").string();
    std::vector<EpochRecord> history(3);
    for (std::size_t i = 0; i < 3; ++i) {
        history[i].epoch = i + 1;
        history[i].train_mse = 0.5 / static_cast<double>(i + 1);
        history[i].val_mse = 0.6 / static_cast<double>(i + 1);
        history[i].lr = 1e-4;
        history[i].stopped = i == 2;
    }
    write_history_jsonl(path, history);
    std::ifstream is(path);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        CHECK(j.at("epoch") == lines + 1);
        CHECK(j.contains("train_mse"));
        CHECK(j.contains("val_mse"));
        CHECK(j.contains("lr"));
        CHECK(j.contains("stopped"));
        ++lines;
    }
    CHECK(lines == 3);
    std::remove(path.c_str());
}
