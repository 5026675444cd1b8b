#include "hyperaod/runconfig.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdlib>
#include <filesystem>

namespace hyperaod {

namespace {

template <typename T>
T get_or(const YAML::Node& node, const std::string& key, T fallback) {
    if (!node || !node[key]) return fallback;
    return node[key].as<T>();
}

void load_model(const YAML::Node& n, ViTCGConfig& m) {
    m.channels = get_or(n, "channels", m.channels);
    m.groups = get_or(n, "groups", m.groups);
    m.spatial = get_or(n, "spatial", m.spatial);
    m.patch = get_or(n, "patch", m.patch);
    m.token_dim = get_or(n, "token_dim", m.token_dim);
    m.depth = get_or(n, "depth", m.depth);
    m.heads = get_or(n, "heads", m.heads);
    m.mlp_ratio = get_or(n, "mlp_ratio", m.mlp_ratio);
    if (n && n["decoder_channels"])
        m.decoder_channels = n["decoder_channels"].as<std::vector<std::size_t>>();
    m.norm_style = get_or(n, "norm_style", m.norm_style);
}

void load_dnn(const YAML::Node& n, PixelDNNConfig& d) {
    d.input_bands = get_or(n, "input_bands", d.input_bands);
    if (n && n["hidden_sizes"]) d.hidden_sizes = n["hidden_sizes"].as<std::vector<std::size_t>>();
    if (n && n["band_indices"] && !n["band_indices"].IsNull())
        d.band_indices = n["band_indices"].as<std::vector<std::size_t>>();
}

void load_train(const YAML::Node& n, TrainSection& t) {
    t.opt.learning_rate = get_or(n, "learning_rate", t.opt.learning_rate);
    t.opt.effective_batch = get_or(n, "effective_batch", t.opt.effective_batch);
    t.opt.micro_batch = get_or(n, "micro_batch", t.opt.micro_batch);
    t.opt.weight_decay = get_or(n, "weight_decay", t.opt.weight_decay);
    t.opt.patience = get_or(n, "patience", t.opt.patience);
    t.opt.max_epochs = get_or(n, "max_epochs", t.opt.max_epochs);
    const std::string sched = get_or<std::string>(n, "scheduler", "none");
    if (sched == "none")
        t.opt.scheduler = TrainConfig::Scheduler::none;
    else if (sched == "cosine")
        t.opt.scheduler = TrainConfig::Scheduler::cosine;
    else
        throw ConfigError("train.scheduler must be 'none' or 'cosine'");
    t.model_kind = get_or(n, "model_kind", t.model_kind);
    t.pack_dir = get_or(n, "pack_dir", t.pack_dir);
    t.checkpoint = get_or(n, "checkpoint", t.checkpoint);
    t.history = get_or(n, "history", t.history);
}

void load_pipeline(const YAML::Node& n, PipelineConfig& p) {
    p.granule_count = get_or(n, "granule_count", p.granule_count);
    p.scene_height = get_or(n, "scene_height", p.scene_height);
    p.scene_width = get_or(n, "scene_width", p.scene_width);
    p.channels = get_or(n, "channels", p.channels);
    if (n && n["ratios"]) {
        const auto r = n["ratios"].as<std::vector<double>>();
        if (r.size() != 3) throw ConfigError("pipeline.ratios must have 3 entries");
        p.ratios = {r[0], r[1], r[2]};
    }
    p.out_dir = get_or(n, "out_dir", p.out_dir);
    p.scenes_dir = get_or(n, "scenes_dir", p.scenes_dir);
    p.quality_bad_bits = get_or(n, "quality_bad_bits", p.quality_bad_bits);
    p.coarse_res_km = get_or(n, "coarse_res_km", p.coarse_res_km);
    p.fine_res_km = get_or(n, "fine_res_km", p.fine_res_km);
    p.max_invalid_fraction = get_or(n, "max_invalid_fraction", p.max_invalid_fraction);
    p.patch = get_or(n, "patch", p.patch);
    if (n && n["granule_files"])
        p.granule_files = n["granule_files"].as<std::vector<std::string>>();
    if (n && n["variables"]) {
        const auto v = n["variables"];
        p.varmap.radiance = get_or(v, "radiance", p.varmap.radiance);
        p.varmap.aod_coarse = get_or(v, "aod", p.varmap.aod_coarse);
        p.varmap.aod_coarse_valid = get_or(v, "aod_valid", p.varmap.aod_coarse_valid);
        p.varmap.quality_flags = get_or(v, "flags", p.varmap.quality_flags);
        p.varmap.lat = get_or(v, "lat", p.varmap.lat);
        p.varmap.lon = get_or(v, "lon", p.varmap.lon);
        p.varmap.wavelengths = get_or(v, "wavelengths", p.varmap.wavelengths);
        p.varmap.time_attr = get_or(v, "time_attr", p.varmap.time_attr);
        p.varmap.id_attr = get_or(v, "id_attr", p.varmap.id_attr);
    }
}

}  // namespace

std::string RunConfig::resolve(const std::string& path) const {
    if (path.empty() || path.front() == '/') return path;
    return (std::filesystem::path(data_dir) / path).string();
}

RunConfig load_run_config(const std::string& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::Exception& e) {
        throw ConfigError("cannot load config '" + path + "': " + e.what());
    }

    RunConfig cfg;
    if (const char* env = std::getenv("HYPERAOD_DATA_DIR")) cfg.data_dir = env;
    try {
        cfg.data_dir = get_or(root, "data_dir", cfg.data_dir);
        cfg.seed = get_or(root, "seed", cfg.seed);
        load_model(root["model"], cfg.model);
        load_dnn(root["dnn"], cfg.dnn);
        load_train(root["train"], cfg.train);
        load_pipeline(root["pipeline"], cfg.pipeline);

        const auto inf = root["inference"];
        cfg.inference.stride = get_or(inf, "stride", cfg.inference.stride);
        cfg.inference.output_format = get_or(inf, "output_format", cfg.inference.output_format);
        cfg.inference.scene = get_or(inf, "scene", cfg.inference.scene);
        cfg.inference.checkpoint = get_or(inf, "checkpoint", cfg.inference.checkpoint);
        cfg.inference.out_prefix = get_or(inf, "out_prefix", cfg.inference.out_prefix);

        const auto val = root["validation"];
        cfg.validation.window_minutes = get_or(val, "window_minutes", cfg.validation.window_minutes);
        cfg.validation.sites = get_or(val, "sites", cfg.validation.sites);
        if (val && val["scenes"]) cfg.validation.scenes = val["scenes"].as<std::vector<std::string>>();
        cfg.validation.checkpoint = get_or(val, "checkpoint", cfg.validation.checkpoint);
        cfg.validation.out_prefix = get_or(val, "out_prefix", cfg.validation.out_prefix);
        cfg.validation.stride = get_or(val, "stride", cfg.validation.stride);

        const auto ev = root["eval"];
        cfg.eval.checkpoint = get_or(ev, "checkpoint", cfg.eval.checkpoint);
        cfg.eval.pack = get_or(ev, "pack", cfg.eval.pack);
        cfg.eval.out_dir = get_or(ev, "out_dir", cfg.eval.out_dir);
        cfg.eval.model_name = get_or(ev, "model_name", cfg.eval.model_name);
    } catch (const YAML::Exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }

    if (cfg.inference.output_format != "netcdf4" && cfg.inference.output_format != "raw")
        throw ConfigError("inference.output_format must be 'netcdf4' or 'raw'");
    return cfg;
}

}  // namespace hyperaod
