#include "hyperaod/granule_io.hpp"

#include <hdf5.h>

#include <cstring>

#include "hyperaod/common.hpp"
#include "hyperaod/datapipe.hpp"

namespace hyperaod {

namespace {

struct H5Guard {
    hid_t id;
    herr_t (*closer)(hid_t);
    H5Guard(hid_t i, herr_t (*c)(hid_t)) : id(i), closer(c) {}
    ~H5Guard() {
        if (id >= 0) closer(id);
    }
    H5Guard(const H5Guard&) = delete;
    H5Guard& operator=(const H5Guard&) = delete;
};

void silence_hdf5_once() {
    static const bool done = [] {
        H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr);
        return true;
    }();
    (void)done;
}

hid_t intermediate_group_lcpl() {
    const hid_t lcpl = H5Pcreate(H5P_LINK_CREATE);
    H5Pset_create_intermediate_group(lcpl, 1);
    return lcpl;
}

template <typename T>
struct H5TypeOf;
template <>
struct H5TypeOf<float> {
    static hid_t file() { return H5T_IEEE_F32LE; }
    static hid_t mem() { return H5T_NATIVE_FLOAT; }
};
template <>
struct H5TypeOf<double> {
    static hid_t file() { return H5T_IEEE_F64LE; }
    static hid_t mem() { return H5T_NATIVE_DOUBLE; }
};
template <>
struct H5TypeOf<std::uint32_t> {
    static hid_t file() { return H5T_STD_U32LE; }
    static hid_t mem() { return H5T_NATIVE_UINT32; }
};
template <>
struct H5TypeOf<std::uint8_t> {
    static hid_t file() { return H5T_STD_U8LE; }
    static hid_t mem() { return H5T_NATIVE_UINT8; }
};

template <typename T>
void write_dataset(hid_t file, const std::string& path, const Array<T>& a) {
    std::vector<hsize_t> dims(a.shape.begin(), a.shape.end());
    H5Guard space(H5Screate_simple(static_cast<int>(dims.size()), dims.data(), nullptr),
                  H5Sclose);
    H5Guard lcpl(intermediate_group_lcpl(), H5Pclose);
    H5Guard ds(H5Dcreate2(file, path.c_str(), H5TypeOf<T>::file(), space.id, lcpl.id,
                          H5P_DEFAULT, H5P_DEFAULT),
               H5Dclose);
    if (ds.id < 0) throw DataError("hdf5: cannot create dataset '" + path + "'");
    if (H5Dwrite(ds.id, H5TypeOf<T>::mem(), H5S_ALL, H5S_ALL, H5P_DEFAULT, a.data.data()) < 0)
        throw DataError("hdf5: write failed for dataset '" + path + "'");
}

void write_dataset_1d(hid_t file, const std::string& path, const std::vector<double>& v) {
    Array<double> a({v.size()});
    a.data = v;
    write_dataset(file, path, a);
}

template <typename T>
Array<T> read_dataset(hid_t file, const std::string& path) {
    H5Guard ds(H5Dopen2(file, path.c_str(), H5P_DEFAULT), H5Dclose);
    if (ds.id < 0) throw DataError("hdf5: dataset '" + path + "' not found");
    H5Guard space(H5Dget_space(ds.id), H5Sclose);
    const int rank = H5Sget_simple_extent_ndims(space.id);
    std::vector<hsize_t> dims(static_cast<std::size_t>(rank));
    H5Sget_simple_extent_dims(space.id, dims.data(), nullptr);
    Array<T> a(std::vector<std::size_t>(dims.begin(), dims.end()));
    if (H5Dread(ds.id, H5TypeOf<T>::mem(), H5S_ALL, H5S_ALL, H5P_DEFAULT, a.data.data()) < 0)
        throw DataError("hdf5: read failed for dataset '" + path + "'");
    return a;
}

void write_string_attr(hid_t file, const std::string& name, const std::string& value) {
    H5Guard space(H5Screate(H5S_SCALAR), H5Sclose);
    H5Guard type(H5Tcopy(H5T_C_S1), H5Tclose);
    H5Tset_size(type.id, value.size() + 1);
    H5Tset_strpad(type.id, H5T_STR_NULLTERM);
    H5Guard attr(H5Acreate2(file, name.c_str(), type.id, space.id, H5P_DEFAULT, H5P_DEFAULT),
                 H5Aclose);
    if (attr.id < 0) throw DataError("hdf5: cannot create attribute '" + name + "'");
    if (H5Awrite(attr.id, type.id, value.c_str()) < 0)
        throw DataError("hdf5: attribute write failed for '" + name + "'");
}

std::string read_string_attr(hid_t file, const std::string& name) {
    H5Guard attr(H5Aopen(file, name.c_str(), H5P_DEFAULT), H5Aclose);
    if (attr.id < 0) throw DataError("hdf5: attribute '" + name + "' not found");
    H5Guard type(H5Aget_type(attr.id), H5Tclose);
    const std::size_t size = H5Tget_size(type.id);
    std::string buf(size + 1, '\0');
    H5Guard mem_type(H5Tcopy(H5T_C_S1), H5Tclose);
    H5Tset_size(mem_type.id, size + 1);
    if (H5Aread(attr.id, mem_type.id, buf.data()) < 0)
        throw DataError("hdf5: attribute read failed for '" + name + "'");
    buf.resize(std::strlen(buf.c_str()));
    return buf;
}

hid_t open_file_rd(const std::string& path) {
    const hid_t f = H5Fopen(path.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT);
    if (f < 0) throw DataError("hdf5: cannot open '" + path + "'");
    return f;
}

hid_t create_file(const std::string& path) {
    const hid_t f = H5Fcreate(path.c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT);
    if (f < 0) throw DataError("hdf5: cannot create '" + path + "'");
    return f;
}

}  // namespace

RawGranule read_raw_granule(const std::string& path, const GranuleVarMap& vars) {
    silence_hdf5_once();
    H5Guard file(open_file_rd(path), H5Fclose);
    RawGranule g;
    g.radiance = read_dataset<float>(file.id, vars.radiance);
    if (g.radiance.rank() != 3) throw DataError("granule: radiance must be C x Hs x Ws");
    g.flags = read_dataset<std::uint32_t>(file.id, vars.quality_flags);
    g.aod_coarse = read_dataset<float>(file.id, vars.aod_coarse);
    g.aod_coarse_valid = read_dataset<std::uint8_t>(file.id, vars.aod_coarse_valid);
    g.lat = read_dataset<float>(file.id, vars.lat);
    g.lon = read_dataset<float>(file.id, vars.lon);
    g.wavelengths = read_dataset<double>(file.id, vars.wavelengths).data;
    g.granule_id = read_string_attr(file.id, vars.id_attr);
    g.acquisition_time = parse_utc(read_string_attr(file.id, vars.time_attr));
    return g;
}

void write_raw_granule(const RawGranule& g, const std::string& path, const GranuleVarMap& vars) {
    silence_hdf5_once();
    H5Guard file(create_file(path), H5Fclose);
    write_dataset(file.id, vars.radiance, g.radiance);
    write_dataset(file.id, vars.quality_flags, g.flags);
    write_dataset(file.id, vars.aod_coarse, g.aod_coarse);
    write_dataset(file.id, vars.aod_coarse_valid, g.aod_coarse_valid);
    write_dataset(file.id, vars.lat, g.lat);
    write_dataset(file.id, vars.lon, g.lon);
    write_dataset_1d(file.id, vars.wavelengths, g.wavelengths);
    write_string_attr(file.id, vars.id_attr, g.granule_id);
    write_string_attr(file.id, vars.time_attr, format_utc(g.acquisition_time));
}

void write_scene_h5(const GranuleScene& scene, const std::string& path) {
    silence_hdf5_once();
    H5Guard file(create_file(path), H5Fclose);
    write_dataset(file.id, "radiance", scene.radiance);
    write_dataset(file.id, "aod", scene.aod);
    write_dataset(file.id, "valid", scene.valid);
    write_dataset(file.id, "latitude", scene.lat);
    write_dataset(file.id, "longitude", scene.lon);
    write_dataset_1d(file.id, "wavelength", scene.wavelengths);
    write_string_attr(file.id, "granule_id", scene.granule_id);
    write_string_attr(file.id, "time_coverage_start", format_utc(scene.acquisition_time));
}

GranuleScene read_scene_h5(const std::string& path) {
    silence_hdf5_once();
    H5Guard file(open_file_rd(path), H5Fclose);
    GranuleScene scene;
    scene.radiance = read_dataset<float>(file.id, "radiance");
    scene.aod = read_dataset<float>(file.id, "aod");
    scene.valid = read_dataset<std::uint8_t>(file.id, "valid");
    scene.lat = read_dataset<float>(file.id, "latitude");
    scene.lon = read_dataset<float>(file.id, "longitude");
    scene.wavelengths = read_dataset<double>(file.id, "wavelength").data;
    scene.granule_id = read_string_attr(file.id, "granule_id");
    scene.acquisition_time = parse_utc(read_string_attr(file.id, "time_coverage_start"));
    scene.validate();
    return scene;
}

void write_retrieval_h5(const std::string& path, const SceneRetrieval& retrieval,
                        const GranuleScene& scene) {
    silence_hdf5_once();
    H5Guard file(create_file(path), H5Fclose);
    write_dataset(file.id, "aod", retrieval.aod);
    write_dataset(file.id, "coverage", retrieval.coverage);
    write_dataset(file.id, "valid", retrieval.valid);
    write_dataset(file.id, "latitude", scene.lat);
    write_dataset(file.id, "longitude", scene.lon);
    write_string_attr(file.id, "granule_id", scene.granule_id);
    write_string_attr(file.id, "time_coverage_start", format_utc(scene.acquisition_time));
}

GranuleScene assemble_scene(const RawGranule& raw, std::uint32_t bad_bit_mask,
                            double coarse_res_km, double fine_res_km) {
    const std::size_t hs = raw.radiance.dim(1), ws = raw.radiance.dim(2);
    const ResampleResult fine = resample_aod(raw.aod_coarse, raw.aod_coarse_valid,
                                             coarse_res_km, fine_res_km);
    if (fine.values.dim(0) != hs || fine.values.dim(1) != ws)
        throw DataError("assemble_scene: resampled AOD grid " + fine.values.shape_str() +
                        " does not match the radiance grid");

    GranuleScene scene;
    scene.granule_id = raw.granule_id;
    scene.acquisition_time = raw.acquisition_time;
    scene.radiance = raw.radiance;
    scene.aod = fine.values;
    scene.lat = raw.lat;
    scene.lon = raw.lon;
    scene.wavelengths = raw.wavelengths;
    scene.valid = filter_quality(raw.radiance, fine.values, raw.flags, bad_bit_mask);
    for (std::size_t p = 0; p < scene.valid.size(); ++p) {
        if (!fine.valid[p]) scene.valid[p] = 0;
        if (scene.valid[p] && scene.aod[p] < 0.0f) scene.valid[p] = 0;  // bad L2 retrievals
    }
    scene.validate();
    return scene;
}

}  // namespace hyperaod
