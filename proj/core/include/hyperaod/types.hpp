#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hyperaod/array.hpp"
#include "hyperaod/common.hpp"

namespace hyperaod {

// One training/inference sample: spectral cube with validity mask.
struct RadiancePatch {
    ArrayF values;                    // C x H x W, TOA radiance
    MaskGrid valid;                   // H x W, 1 = usable pixel
    std::vector<double> wavelengths;  // band centers, nm, strictly increasing

    std::size_t channels() const { return values.dim(0); }
    std::size_t height() const { return values.dim(1); }
    std::size_t width() const { return values.dim(2); }
    void validate() const;
};

// 2-D AOD map at 550 nm (reference or prediction).
struct AODField {
    ArrayF values;  // H x W
    MaskGrid valid; // H x W

    std::size_t height() const { return values.dim(0); }
    std::size_t width() const { return values.dim(1); }
};

// A full collocated scene from which patches are cut. All 2-D fields share
// the scene grid; `valid` is the conjunction of L1B quality and L2
// availability.
struct GranuleScene {
    std::string granule_id;
    std::int64_t acquisition_time = 0;  // unix seconds, UTC
    ArrayF radiance;                    // C x Hs x Ws
    ArrayF aod;                         // Hs x Ws, 550 nm after resampling
    MaskGrid valid;                     // Hs x Ws
    ArrayF lat;                         // Hs x Ws, degrees
    ArrayF lon;                         // Hs x Ws, degrees
    std::vector<double> wavelengths;

    std::size_t channels() const { return radiance.dim(0); }
    std::size_t height() const { return radiance.dim(1); }
    std::size_t width() const { return radiance.dim(2); }
    void validate() const;
};

enum class Split { train, val, test };

const char* to_string(Split s);
Split split_from_string(const std::string& s);

// Per-band standardization statistics computed on the training split.
struct BandStats {
    std::vector<double> mean;
    std::vector<double> stddev;  // floored at 1e-8

    std::size_t bands() const { return mean.size(); }
};

struct PatchSample {
    RadiancePatch radiance;
    AODField aod;
    std::string granule_id;
    Split split = Split::train;
};

struct PatchPack {
    std::vector<PatchSample> samples;
    std::optional<BandStats> band_stats;

    std::vector<const PatchSample*> of_split(Split s) const;
    void validate() const;  // patch geometry, invalid budget, split coherence
};

struct SplitAssignment {
    std::map<std::string, Split> by_granule;
    std::uint64_t seed = 0;
    std::array<double, 3> ratios{};  // train, val, test
};

// The four scalar metrics plus sample count.
struct MetricsReport {
    double mse = 0.0;
    double rmse = 0.0;
    double mbe = 0.0;
    double ioa = 0.0;
    std::size_t n_valid = 0;
    std::string model_name;
};

// One AERONET-style ground observation.
struct SiteRecord {
    std::string site;
    double lat = 0.0;
    double lon = 0.0;
    std::int64_t time = 0;   // unix seconds, UTC
    double aod_500 = 0.0;    // AOD at 500 nm
    double angstrom = 0.0;   // Angstrom exponent
};

}  // namespace hyperaod
