#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyperaod/array.hpp"
#include "hyperaod/inference.hpp"
#include "hyperaod/types.hpp"

namespace hyperaod {

// Dataset paths inside a granule container. NetCDF-4 granules are HDF5
// files, so the reader walks them with the HDF5 API using these
// config-supplied paths; the defaults mirror the synthetic writer.
struct GranuleVarMap {
    std::string radiance = "observation_data/radiance";
    std::string aod_coarse = "geophysical_data/aod_550";
    std::string aod_coarse_valid = "geophysical_data/aod_valid";
    std::string quality_flags = "observation_data/quality_flags";
    std::string lat = "geolocation_data/latitude";
    std::string lon = "geolocation_data/longitude";
    std::string wavelengths = "sensor_band_parameters/wavelength";
    std::string time_attr = "time_coverage_start";  // root attribute, ISO UTC
    std::string id_attr = "granule_id";             // root attribute
};

// L1B + L2 contents of one granule before collocation: radiance on the fine
// grid, AOD on the coarse grid, per-pixel quality flags.
struct RawGranule {
    std::string granule_id;
    std::int64_t acquisition_time = 0;
    ArrayF radiance;             // C x Hs x Ws
    Array<std::uint32_t> flags;  // Hs x Ws
    ArrayF aod_coarse;           // (Hs/f) x (Ws/f)
    MaskGrid aod_coarse_valid;
    ArrayF lat, lon;             // Hs x Ws
    std::vector<double> wavelengths;
};

RawGranule read_raw_granule(const std::string& path, const GranuleVarMap& vars);
void write_raw_granule(const RawGranule& granule, const std::string& path,
                       const GranuleVarMap& vars);

// Collocated-scene container (HDF5): radiance, aod, valid, lat, lon,
// wavelengths + id/time attributes.
void write_scene_h5(const GranuleScene& scene, const std::string& path);
GranuleScene read_scene_h5(const std::string& path);

// Assembled retrieval output: aod, coverage, valid, lat, lon.
void write_retrieval_h5(const std::string& path, const SceneRetrieval& retrieval,
                        const GranuleScene& scene);

// Steps of the preprocessing chain applied to one raw granule: quality
// filtering, coarse-AOD resampling onto the radiance grid, validity
// conjunction.
GranuleScene assemble_scene(const RawGranule& raw, std::uint32_t bad_bit_mask,
                            double coarse_res_km, double fine_res_km);

}  // namespace hyperaod
