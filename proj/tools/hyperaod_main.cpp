// hyperaod: synthetic-data generation, granule preprocessing, training,
// evaluation, sliding-window retrieval, and AERONET validation from one
// YAML config. Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric
// failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "hyperaod/aeronet.hpp"
#include "hyperaod/baselines.hpp"
#include "hyperaod/checkpoint.hpp"
#include "hyperaod/datapipe.hpp"
#include "hyperaod/granule_io.hpp"
#include "hyperaod/image.hpp"
#include "hyperaod/inference.hpp"
#include "hyperaod/metrics.hpp"
#include "hyperaod/model.hpp"
#include "hyperaod/runconfig.hpp"
#include "hyperaod/trainer.hpp"

namespace fs = std::filesystem;
using namespace hyperaod;

namespace {

void ensure_dir(const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw DataError("cannot create directory '" + path + "': " + ec.message());
}

void refuse_existing(const std::string& path, bool force) {
    if (!force && fs::exists(path))
        throw DataError("output '" + path + "' already exists (use --force to overwrite)");
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open '" + path + "' for writing");
    os << text;
}

struct SplitPacks {
    PatchPack train, val, test;
};

SplitPacks split_scenes_into_packs(const std::vector<GranuleScene>& scenes,
                                   const PipelineConfig& pipe, std::uint64_t seed,
                                   nlohmann::json& manifest) {
    std::vector<std::string> ids;
    for (const auto& s : scenes) ids.push_back(s.granule_id);
    const SplitAssignment assignment = split_granules(ids, pipe.ratios, seed);

    SplitPacks packs;
    manifest["granules"] = nlohmann::json::array();
    for (const auto& scene : scenes) {
        const Split tag = assignment.by_granule.at(scene.granule_id);
        auto samples = extract_patches(scene, pipe.patch, pipe.max_invalid_fraction);
        for (auto& s : samples) s.split = tag;
        PatchPack& dst = tag == Split::train ? packs.train
                         : tag == Split::val ? packs.val
                                             : packs.test;
        manifest["granules"].push_back({{"id", scene.granule_id},
                                        {"time", format_utc(scene.acquisition_time)},
                                        {"split", to_string(tag)},
                                        {"patches", samples.size()}});
        for (auto& s : samples) dst.samples.push_back(std::move(s));
    }
    if (packs.train.samples.empty()) throw DataError("no training patches after splitting");

    const BandStats stats = compute_band_stats(packs.train);
    packs.train.band_stats = stats;
    packs.val.band_stats = stats;
    packs.test.band_stats = stats;
    manifest["patches"] = {{"train", packs.train.samples.size()},
                           {"val", packs.val.samples.size()},
                           {"test", packs.test.samples.size()}};
    return packs;
}

void write_split_packs(const SplitPacks& packs, const std::string& out_dir, bool force,
                       nlohmann::json& manifest) {
    ensure_dir(out_dir);
    auto emit = [&](const PatchPack& pack, const char* name) {
        if (pack.samples.empty()) return;
        const std::string path = out_dir + "/" + name + ".apk1";
        refuse_existing(path, force);
        write_pack(pack, path);
        manifest["packs"][name] = path;
    };
    emit(packs.train, "train");
    emit(packs.val, "val");
    emit(packs.test, "test");
}

int cmd_synth(const RunConfig& cfg, bool force) {
    const auto& pipe = cfg.pipeline;
    const std::string scenes_dir = cfg.resolve(pipe.scenes_dir);
    ensure_dir(scenes_dir);

    nlohmann::json manifest;
    manifest["seed"] = cfg.seed;
    std::vector<GranuleScene> scenes;
    for (std::size_t i = 0; i < pipe.granule_count; ++i) {
        GranuleScene scene =
            synth_granule(cfg.seed + i, pipe.scene_height, pipe.scene_width, pipe.channels);
        const std::string path = scenes_dir + "/" + scene.granule_id + ".h5";
        refuse_existing(path, force);
        write_scene_h5(scene, path);
        scenes.push_back(std::move(scene));
    }

    SplitPacks packs = split_scenes_into_packs(scenes, pipe, cfg.seed, manifest);
    write_split_packs(packs, cfg.resolve(pipe.out_dir), force, manifest);

    const std::string manifest_path = cfg.resolve(pipe.out_dir) + "/manifest.json";
    write_text(manifest_path, manifest.dump(2) + "\n");
    std::cout << "synth: " << scenes.size() << " granules, " << packs.train.samples.size()
              << "/" << packs.val.samples.size() << "/" << packs.test.samples.size()
              << " train/val/test patches\n"
              << "manifest: " << manifest_path << "\n";
    return 0;
}

int cmd_prep(const RunConfig& cfg, bool force) {
    const auto& pipe = cfg.pipeline;
    if (pipe.granule_files.empty())
        throw ConfigError("prep: pipeline.granule_files is empty");

    const std::string scenes_dir = cfg.resolve(pipe.scenes_dir);
    ensure_dir(scenes_dir);
    const double factor = pipe.coarse_res_km / pipe.fine_res_km;
    std::cout << "prep: resample factor " << factor << " (" << pipe.coarse_res_km << " km -> "
              << pipe.fine_res_km << " km)\n";

    nlohmann::json manifest;
    manifest["seed"] = cfg.seed;
    manifest["reports"] = nlohmann::json::array();
    std::vector<GranuleScene> scenes;
    for (const auto& file : pipe.granule_files) {
        const RawGranule raw = read_raw_granule(cfg.resolve(file), pipe.varmap);
        GranuleScene scene =
            assemble_scene(raw, pipe.quality_bad_bits, pipe.coarse_res_km, pipe.fine_res_km);
        std::size_t invalid = 0;
        for (auto v : scene.valid.data)
            if (!v) ++invalid;
        const std::size_t tiles_y = scene.height() / pipe.patch;
        const std::size_t tiles_x = scene.width() / pipe.patch;
        const auto kept = extract_patches(scene, pipe.patch, pipe.max_invalid_fraction).size();
        manifest["reports"].push_back({{"id", scene.granule_id},
                                       {"pixels_filtered", invalid},
                                       {"patches_kept", kept},
                                       {"patches_dropped", tiles_y * tiles_x - kept}});
        const std::string out = scenes_dir + "/" + scene.granule_id + ".h5";
        refuse_existing(out, force);
        write_scene_h5(scene, out);
        scenes.push_back(std::move(scene));
    }

    SplitPacks packs = split_scenes_into_packs(scenes, pipe, cfg.seed, manifest);
    write_split_packs(packs, cfg.resolve(pipe.out_dir), force, manifest);
    const std::string manifest_path = cfg.resolve(pipe.out_dir) + "/prep_report.json";
    write_text(manifest_path, manifest.dump(2) + "\n");
    std::cout << "prep report: " << manifest_path << "\n";
    return 0;
}

PatchPack load_training_pack(const RunConfig& cfg) {
    const std::string dir = cfg.resolve(cfg.train.pack_dir);
    PatchPack pack = read_pack(dir + "/train.apk1");
    const std::string val_path = dir + "/val.apk1";
    if (fs::exists(val_path)) {
        PatchPack val = read_pack(val_path);
        for (auto& s : val.samples) pack.samples.push_back(std::move(s));
    }
    return pack;
}

// Applies the model kind: channel grouping ablation for vitcg_nocg, band
// subsetting for the DNN variants (pack samples are reduced in place).
std::unique_ptr<Regressor> instantiate_model(const RunConfig& cfg, const std::string& kind,
                                             PatchPack& pack) {
    if (pack.samples.empty()) throw DataError("training pack is empty");
    const std::size_t c = pack.samples.front().radiance.channels();

    if (kind == "vitcg" || kind == "vitcg_nocg") {
        ViTCGConfig mc = cfg.model;
        mc.channels = c;
        if (kind == "vitcg_nocg") mc.groups = 1;
        if (mc.channels % mc.groups != 0)
            throw ConfigError("model groups " + std::to_string(mc.groups) +
                              " do not divide pack channels " + std::to_string(c));
        return std::make_unique<ViTCG>(mc, cfg.seed);
    }
    if (kind == "dnn8" || kind == "dnn291") {
        PixelDNNConfig dc = cfg.dnn;
        if (kind == "dnn8") {
            dc.input_bands = 8;
            if (!dc.band_indices) dc.band_indices = even_band_indices(c, 8);
        } else {
            dc.input_bands = c;
            dc.band_indices.reset();
        }
        if (dc.band_indices) {
            for (auto& s : pack.samples) s.radiance = select_bands(s.radiance, *dc.band_indices);
            pack.band_stats.reset();  // recompute over the subset
        }
        return std::make_unique<PixelDnn>(dc, cfg.seed);
    }
    throw ConfigError("unknown model kind '" + kind +
                      "' (expected vitcg|vitcg_nocg|dnn8|dnn291)");
}

int cmd_train(const RunConfig& cfg, const std::string& kind_flag) {
    const std::string kind = kind_flag.empty() ? cfg.train.model_kind : kind_flag;
    PatchPack pack = load_training_pack(cfg);
    auto model = instantiate_model(cfg, kind, pack);
    if (!pack.band_stats) pack.band_stats = compute_band_stats(pack);

    TrainConfig tc = cfg.train.opt;
    tc.seed = cfg.seed;
    const TrainResult result = train(*model, pack, tc);

    const std::string ckpt = cfg.resolve(cfg.train.checkpoint);
    ensure_dir(fs::path(ckpt).parent_path().string());
    save_checkpoint(ckpt, *model, *pack.band_stats);
    write_history_jsonl(cfg.resolve(cfg.train.history), result.history);

    std::cout << "train[" << kind << "]: " << result.history.size() << " epochs, "
              << result.optimizer_steps << " optimizer steps, best epoch " << result.best_epoch
              << " (val MSE " << result.best_val << ")\n"
              << "checkpoint: " << ckpt << "\n";
    return 0;
}

AODField predict_sample(const Regressor& model, const Checkpoint& ck, const PatchSample& s) {
    RadiancePatch patch = s.radiance;
    if (model.input_channels() != patch.channels()) {
        if (ck.config.contains("band_indices") && !ck.config["band_indices"].is_null())
            patch = select_bands(patch,
                                 ck.config["band_indices"].get<std::vector<std::size_t>>());
        else
            throw DataError("checkpoint expects " + std::to_string(model.input_channels()) +
                            " channels, pack has " + std::to_string(patch.channels()));
    }
    return model.predict(standardize(patch, ck.stats));
}

int cmd_eval(const RunConfig& cfg) {
    const Checkpoint ck = read_checkpoint(cfg.resolve(cfg.eval.checkpoint));
    const auto model = build_model(ck);
    const PatchPack pack = read_pack(cfg.resolve(cfg.eval.pack));
    const auto test = pack.of_split(Split::test);
    if (test.empty()) throw DataError("eval: pack has no test samples");

    MetricsAccumulator acc;
    for (const auto* s : test) {
        const AODField pred = predict_sample(*model, ck, *s);
        acc.add(pred, s->aod);
    }
    const std::string name = cfg.eval.model_name.empty() ? ck.model_kind : cfg.eval.model_name;
    const MetricsReport report = acc.compute(name);

    const std::string out_dir = cfg.resolve(cfg.eval.out_dir);
    ensure_dir(out_dir);
    const TableExport table = export_table({report});
    write_text(out_dir + "/metrics.json", table.json.dump(2) + "\n");
    write_text(out_dir + "/metrics.md", table.markdown);
    const ScatterData scatter = scatter_bin(acc.predictions(), acc.observations());
    write_text(out_dir + "/scatter.csv", scatter_csv(scatter));
    write_scatter_png(out_dir + "/scatter.png", scatter);

    std::cout << "eval[" << name << "]: MSE " << report.mse << "  RMSE " << report.rmse
              << "  MBE " << report.mbe << "  IOA " << report.ioa << "  (n=" << report.n_valid
              << ")\n"
              << "reports in " << out_dir << "\n";
    return 0;
}

void write_raw_retrieval(const std::string& path, const SceneRetrieval& r,
                         const GranuleScene& scene) {
    nlohmann::json header{{"magic", "SCN1"},
                          {"H", r.aod.dim(0)},
                          {"W", r.aod.dim(1)},
                          {"granule_id", scene.granule_id},
                          {"time", format_utc(scene.acquisition_time)},
                          {"payload", {"aod:f32", "coverage:u32", "valid:u8", "lat:f32", "lon:f32"}}};
    const std::string hs = header.dump();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open '" + path + "'");
    os.write("SCN1", 4);
    const std::uint32_t len = static_cast<std::uint32_t>(hs.size());
    unsigned char b[4] = {static_cast<unsigned char>(len & 0xff),
                          static_cast<unsigned char>((len >> 8) & 0xff),
                          static_cast<unsigned char>((len >> 16) & 0xff),
                          static_cast<unsigned char>((len >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    const ArrayF aod32 = to_f32(r.aod);
    os.write(reinterpret_cast<const char*>(aod32.data.data()),
             static_cast<std::streamsize>(aod32.size() * sizeof(float)));
    os.write(reinterpret_cast<const char*>(r.coverage.data.data()),
             static_cast<std::streamsize>(r.coverage.size() * sizeof(std::uint32_t)));
    os.write(reinterpret_cast<const char*>(r.valid.data.data()),
             static_cast<std::streamsize>(r.valid.size()));
    os.write(reinterpret_cast<const char*>(scene.lat.data.data()),
             static_cast<std::streamsize>(scene.lat.size() * sizeof(float)));
    os.write(reinterpret_cast<const char*>(scene.lon.data.data()),
             static_cast<std::streamsize>(scene.lon.size() * sizeof(float)));
    if (!os) throw DataError("write failed for '" + path + "'");
}

int cmd_infer(const RunConfig& cfg, std::optional<std::size_t> stride_flag, bool force) {
    if (cfg.inference.scene.empty()) throw ConfigError("infer: inference.scene is not set");
    const Checkpoint ck = read_checkpoint(cfg.resolve(cfg.inference.checkpoint));
    const auto model = build_model(ck);
    const GranuleScene scene = read_scene_h5(cfg.resolve(cfg.inference.scene));

    std::size_t window = scene.height();
    if (ck.model_kind == "vitcg") window = ck.config.at("spatial").get<std::size_t>();
    const std::size_t stride = stride_flag.value_or(cfg.inference.stride);
    const WindowPlan plan = slide_windows(scene.height(), scene.width(), window, stride);
    const SceneRetrieval retrieval =
        retrieve_scene(make_model_predictor(*model, ck.stats), scene, plan);

    const std::string prefix = cfg.resolve(cfg.inference.out_prefix);
    ensure_dir(fs::path(prefix).parent_path().string());
    std::string map_path;
    if (cfg.inference.output_format == "netcdf4") {
        map_path = prefix + ".h5";
        refuse_existing(map_path, force);
        write_retrieval_h5(map_path, retrieval, scene);
    } else {
        map_path = prefix + ".scn";
        refuse_existing(map_path, force);
        write_raw_retrieval(map_path, retrieval, scene);
    }
    write_aod_quicklook(prefix + ".png", retrieval.aod, retrieval.valid);

    std::uint32_t cov_min = retrieval.coverage[0], cov_max = retrieval.coverage[0];
    for (auto c : retrieval.coverage.data) {
        cov_min = std::min(cov_min, c);
        cov_max = std::max(cov_max, c);
    }
    std::cout << "infer: " << plan.origins.size() << " windows (window " << window
              << ", stride " << stride << "), coverage " << cov_min << ".." << cov_max << "\n"
              << "map: " << map_path << "  quick-look: " << prefix << ".png\n";
    return 0;
}

int cmd_aeronet(const RunConfig& cfg, std::optional<std::size_t> stride_flag) {
    if (cfg.validation.scenes.empty())
        throw ConfigError("aeronet: validation.scenes is empty");
    const Checkpoint ck = read_checkpoint(cfg.resolve(cfg.validation.checkpoint));
    const auto model = build_model(ck);
    const auto records = read_site_records(cfg.resolve(cfg.validation.sites));

    std::vector<GranuleScene> scenes;
    std::vector<SceneRetrieval> retrievals;
    const std::size_t stride = stride_flag.value_or(cfg.validation.stride);
    for (const auto& path : cfg.validation.scenes) {
        scenes.push_back(read_scene_h5(cfg.resolve(path)));
        const auto& scene = scenes.back();
        std::size_t window = scene.height();
        if (ck.model_kind == "vitcg") window = ck.config.at("spatial").get<std::size_t>();
        const WindowPlan plan = slide_windows(scene.height(), scene.width(), window, stride);
        retrievals.push_back(retrieve_scene(make_model_predictor(*model, ck.stats), scene, plan));
    }

    std::vector<std::pair<const GranuleScene*, const SceneRetrieval*>> pairs;
    for (std::size_t i = 0; i < scenes.size(); ++i)
        pairs.emplace_back(&scenes[i], &retrievals[i]);
    const ValidationResult result =
        validate_against_sites(pairs, records, cfg.validation.window_minutes);

    const std::string prefix = cfg.resolve(cfg.validation.out_prefix);
    ensure_dir(fs::path(prefix).parent_path().string());
    write_text(prefix + "_validation.csv", validation_csv(result.rows));
    if (result.report) {
        const TableExport table = export_table({*result.report});
        write_text(prefix + "_metrics.json", table.json.dump(2) + "\n");
        std::vector<double> lats, lons, taus;
        for (const auto& r : result.rows) {
            lats.push_back(r.lat);
            lons.push_back(r.lon);
            taus.push_back(r.tau_ground_550);
        }
        write_points_map_png(prefix + "_map.png", lats, lons, taus);
        std::cout << "aeronet: " << result.rows.size() << " collocated samples ("
                  << result.skipped << " skipped), IOA " << result.report->ioa << ", MBE "
                  << result.report->mbe << "\n";
    } else {
        std::cout << "aeronet: no spatiotemporally collocated samples within +/-"
                  << cfg.validation.window_minutes << " min; nothing to validate\n";
    }
    std::cout << "validation table: " << prefix << "_validation.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hyperaod: hyperspectral AOD retrieval toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed_flag = 0;
    bool seed_set = false;
    bool force = false;
    std::string model_flag;
    std::size_t stride_flag = 0;
    bool stride_set = false;

    auto* synth = app.add_subcommand("synth", "generate synthetic granules and patch packs");
    auto* prep = app.add_subcommand("prep", "build packs from granule files (five-step chain)");
    auto* train_cmd = app.add_subcommand("train", "train a model on prepared packs");
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test pack");
    auto* infer = app.add_subcommand("infer", "sliding-window retrieval over a scene");
    auto* aeronet = app.add_subcommand("aeronet", "validate retrievals against ground sites");

    for (auto* sub : {synth, prep, train_cmd, eval_cmd, infer, aeronet}) {
        sub->add_option("--config", config_path, "YAML run configuration")->required();
        sub->add_option("--seed", seed_flag, "override config seed")
            ->each([&](const std::string&) { seed_set = true; });
    }
    for (auto* sub : {synth, prep, infer})
        sub->add_flag("--force", force, "overwrite existing outputs");
    train_cmd->add_option("--model", model_flag, "vitcg|vitcg_nocg|dnn8|dnn291");
    for (auto* sub : {infer, aeronet})
        sub->add_option("--stride", stride_flag, "sliding-window stride")
            ->each([&](const std::string&) { stride_set = true; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg = load_run_config(config_path);
        if (seed_set) cfg.seed = seed_flag;
        const std::optional<std::size_t> stride =
            stride_set ? std::optional<std::size_t>(stride_flag) : std::nullopt;

        if (synth->parsed()) return cmd_synth(cfg, force);
        if (prep->parsed()) return cmd_prep(cfg, force);
        if (train_cmd->parsed()) return cmd_train(cfg, model_flag);
        if (eval_cmd->parsed()) return cmd_eval(cfg);
        if (infer->parsed()) return cmd_infer(cfg, stride, force);
        if (aeronet->parsed()) return cmd_aeronet(cfg, stride);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
