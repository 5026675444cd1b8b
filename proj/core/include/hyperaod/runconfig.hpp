#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hyperaod/baselines.hpp"
#include "hyperaod/granule_io.hpp"
#include "hyperaod/model.hpp"
#include "hyperaod/trainer.hpp"

namespace hyperaod {

struct PipelineConfig {
    std::size_t granule_count = 6;
    std::size_t scene_height = 192;
    std::size_t scene_width = 192;
    std::size_t channels = 12;
    std::array<double, 3> ratios{0.7, 0.15, 0.15};
    std::string out_dir = "packs";
    std::string scenes_dir = "scenes";
    std::uint32_t quality_bad_bits = 0x3;
    double coarse_res_km = 8.4;
    double fine_res_km = 1.2;
    double max_invalid_fraction = 0.01;
    std::size_t patch = 96;
    std::vector<std::string> granule_files;  // inputs for `prep`
    GranuleVarMap varmap;
};

struct TrainSection {
    TrainConfig opt;
    std::string model_kind = "vitcg";  // vitcg | vitcg_nocg | dnn8 | dnn291
    std::string pack_dir = "packs";
    std::string checkpoint = "checkpoints/model.ckpt";
    std::string history = "checkpoints/history.jsonl";
};

struct InferenceSection {
    std::size_t stride = 96;
    std::string output_format = "netcdf4";  // netcdf4 | raw
    std::string scene;
    std::string checkpoint = "checkpoints/model.ckpt";
    std::string out_prefix = "retrieval";
};

struct ValidationSection {
    int window_minutes = 30;
    std::string sites = "sites.csv";
    std::vector<std::string> scenes;
    std::string checkpoint = "checkpoints/model.ckpt";
    std::string out_prefix = "aeronet";
    std::size_t stride = 96;
};

struct EvalSection {
    std::string checkpoint = "checkpoints/model.ckpt";
    std::string pack = "packs/test.apk1";
    std::string out_dir = "eval";
    std::string model_name;  // defaults to the checkpoint's model kind
};

// One config file drives every subcommand; CLI flags override file values.
struct RunConfig {
    std::string data_dir = ".";  // default from $HYPERAOD_DATA_DIR
    std::uint64_t seed = 1234;
    ViTCGConfig model;
    PixelDNNConfig dnn;
    TrainSection train;
    PipelineConfig pipeline;
    InferenceSection inference;
    ValidationSection validation;
    EvalSection eval;

    std::string resolve(const std::string& path) const;  // data_dir-relative
};

RunConfig load_run_config(const std::string& path);  // YAML; ConfigError on problems

}  // namespace hyperaod
