#include "hyperaod/types.hpp"

#include <cmath>

namespace hyperaod {

void RadiancePatch::validate() const {
    if (values.rank() != 3) throw DataError("RadiancePatch: values must be C x H x W");
    if (valid.rank() != 2 || valid.dim(0) != height() || valid.dim(1) != width())
        throw DataError("RadiancePatch: valid mask shape mismatch");
    if (wavelengths.size() != channels())
        throw DataError("RadiancePatch: wavelengths length != channel count");
    for (std::size_t i = 1; i < wavelengths.size(); ++i)
        if (!(wavelengths[i] > wavelengths[i - 1]))
            throw DataError("RadiancePatch: wavelengths must be strictly increasing");
}

void GranuleScene::validate() const {
    if (radiance.rank() != 3) throw DataError("GranuleScene: radiance must be C x Hs x Ws");
    const std::size_t h = height(), w = width();
    auto check2d = [&](const auto& a, const char* name) {
        if (a.rank() != 2 || a.dim(0) != h || a.dim(1) != w)
            throw DataError(std::string("GranuleScene: ") + name + " shape mismatch");
    };
    check2d(aod, "aod");
    check2d(valid, "valid");
    check2d(lat, "lat");
    check2d(lon, "lon");
    if (wavelengths.size() != channels())
        throw DataError("GranuleScene: wavelengths length != channel count");
    for (std::size_t i = 0; i < lat.size(); ++i) {
        if (lat[i] < -90.0f || lat[i] > 90.0f) throw DataError("GranuleScene: latitude out of range");
        if (lon[i] < -180.0f || lon[i] > 180.0f) throw DataError("GranuleScene: longitude out of range");
    }
    for (std::size_t i = 0; i < valid.size(); ++i) {
        if (!valid[i]) continue;
        if (!std::isfinite(aod[i]) || aod[i] < 0.0f)
            throw DataError("GranuleScene: valid pixel with non-finite or negative AOD");
    }
}

const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "test";
    }
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw DataError("unknown split tag '" + s + "'");
}

std::vector<const PatchSample*> PatchPack::of_split(Split s) const {
    std::vector<const PatchSample*> out;
    for (const auto& p : samples)
        if (p.split == s) out.push_back(&p);
    return out;
}

void PatchPack::validate() const {
    std::map<std::string, Split> seen;
    for (const auto& s : samples) {
        s.radiance.validate();
        const std::size_t h = s.radiance.height(), w = s.radiance.width();
        if (s.aod.height() != h || s.aod.width() != w)
            throw DataError("PatchPack: radiance/aod patch size mismatch");
        const std::size_t budget = (h * w) / 100;  // floor(0.01 * H * W)
        std::size_t invalid = 0;
        for (std::size_t i = 0; i < s.radiance.valid.size(); ++i)
            if (!s.radiance.valid[i]) ++invalid;
        if (invalid > budget)
            throw DataError("PatchPack: patch from granule '" + s.granule_id + "' has " +
                            std::to_string(invalid) + " invalid pixels (budget " +
                            std::to_string(budget) + ")");
        auto it = seen.find(s.granule_id);
        if (it == seen.end())
            seen.emplace(s.granule_id, s.split);
        else if (it->second != s.split)
            throw DataError("PatchPack: granule '" + s.granule_id + "' appears in two splits");
    }
}

}  // namespace hyperaod
