#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hyperaod/array.hpp"
#include "hyperaod/types.hpp"

namespace hyperaod {

// valid := no configured bad flag bit set AND radiance finite across all
// bands AND reference AOD finite.
MaskGrid filter_quality(const ArrayF& radiance, const ArrayF& aod,
                        const Array<std::uint32_t>& flags, std::uint32_t bad_bit_mask);

// Clamped bilinear sample of a 2-D field at fractional pixel coordinates.
double bilinear_at(const ArrayF& field, double row, double col);

struct ResampleResult {
    ArrayF values;   // (Hc*f) x (Wc*f); NaN where invalid
    MaskGrid valid;  // fine pixel valid iff every coarse cell in its stencil is valid
};

// Bilinear upsampling of the coarse AOD product onto the radiance grid.
// coarse_res/fine_res must be a whole number (8.4 km / 1.2 km = 7).
ResampleResult resample_aod(const ArrayF& coarse, const MaskGrid& coarse_valid,
                            double coarse_res_km, double fine_res_km);

// Non-overlapping row-major tiling from (0,0); partial edge tiles dropped;
// a tile is kept iff its invalid-pixel count <= floor(frac * patch^2).
std::vector<PatchSample> extract_patches(const GranuleScene& scene, std::size_t patch = 96,
                                         double max_invalid_fraction = 0.01);

// Deterministic granule-level partition: seeded shuffle, contiguous slices
// sized by largest-remainder rounding of the ratios.
SplitAssignment split_granules(const std::vector<std::string>& granule_ids,
                               std::array<double, 3> ratios, std::uint64_t seed);

// Per-band mean/std over valid pixels of the training split, 64-bit
// accumulation, std floored at 1e-8.
BandStats compute_band_stats(const PatchPack& pack);

// Per-band (value - mean) / std; invalid or non-finite pixels zero-filled
// after standardization.
RadiancePatch standardize(const RadiancePatch& raw, const BandStats& stats);

// APK1 container. Round trips are bit-exact, including NaN payloads in
// masked regions.
void write_pack(const PatchPack& pack, const std::string& path);
PatchPack read_pack(const std::string& path);

// Deterministic synthetic granule: a smooth positive AOD field, radiance
// with a fixed band-wise spectral signature plus a smooth scene trend and
// noise, and ~0.5% invalid pixels in small blobs.
GranuleScene synth_granule(std::uint64_t seed, std::size_t scene_height,
                           std::size_t scene_width, std::size_t channels);

}  // namespace hyperaod
