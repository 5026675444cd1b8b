#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hyperaod/array.hpp"
#include "hyperaod/regressor.hpp"
#include "hyperaod/types.hpp"

namespace hyperaod {

inline constexpr const char* kCheckpointFormat = "vitcg-ckpt-1";

// In-memory image of a checkpoint archive: parameter tensors keyed by their
// stable hierarchical names, the full model config, the standardization
// statistics, and the format-version string.
struct Checkpoint {
    std::string format_version;
    std::string model_kind;  // "vitcg" | "pixel_dnn"
    nlohmann::json config;
    BandStats stats;
    std::vector<std::pair<std::string, ArrayD>> tensors;
};

void save_checkpoint(const std::string& path, const Regressor& model, const BandStats& stats);
Checkpoint read_checkpoint(const std::string& path);

// Rebuilds the model named by the checkpoint and loads every tensor by name.
std::unique_ptr<Regressor> build_model(const Checkpoint& ck);

}  // namespace hyperaod
